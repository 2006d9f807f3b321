#include "notesurv/kernels.hpp"

#include <cmath>
#include <cstring>

namespace notesurv::kern {

namespace {
// below this many multiply-adds the fork/join overhead is not worth it
constexpr std::size_t kParallelFlops = 1u << 15;

inline void gemm_nn_row(const double* a, const double* b, double* c,
                        std::size_t i, std::size_t k, std::size_t n) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
        const double aip = ai[p];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
}

inline void gemm_nt_row(const double* a, const double* b, double* c,
                        std::size_t i, std::size_t k, std::size_t n) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] = s;
    }
}

inline void gemm_tn_row(const double* a, const double* b, double* c,
                        std::size_t i, std::size_t k, std::size_t n,
                        std::size_t m) {
    (void)m;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    // C[i][j] = sum_p A[p][i] * B[p][j]
    for (std::size_t p = 0; p < k; ++p) {
        const double api = a[p * m + i];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
}

inline void softmax_row(const double* x, double* y, std::size_t cols,
                        const std::uint8_t* mask) {
    double mx = -1e300;
    for (std::size_t j = 0; j < cols; ++j)
        if (!mask || mask[j]) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        if (mask && !mask[j]) {
            y[j] = 0.0;
        } else {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
}
}  // namespace

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n >= kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(m); ++i)
            gemm_nn_row(a, b, c, static_cast<std::size_t>(i), k, n);
    } else {
        for (std::size_t i = 0; i < m; ++i) gemm_nn_row(a, b, c, i, k, n);
    }
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n >= kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(m); ++i)
            gemm_nt_row(a, b, c, static_cast<std::size_t>(i), k, n);
    } else {
        for (std::size_t i = 0; i < m; ++i) gemm_nt_row(a, b, c, i, k, n);
    }
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n >= kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(m); ++i)
            gemm_tn_row(a, b, c, static_cast<std::size_t>(i), k, n, m);
    } else {
        for (std::size_t i = 0; i < m; ++i) gemm_tn_row(a, b, c, i, k, n, m);
    }
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols,
                  const std::uint8_t* mask) {
    if (rows * cols >= kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(rows); ++i)
            softmax_row(x + i * cols, y + i * cols, cols, mask);
    } else {
        for (std::size_t i = 0; i < rows; ++i)
            softmax_row(x + i * cols, y + i * cols, cols, mask);
    }
}

namespace serial {

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) gemm_nn_row(a, b, c, i, k, n);
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) gemm_nt_row(a, b, c, i, k, n);
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) gemm_tn_row(a, b, c, i, k, n, m);
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols,
                  const std::uint8_t* mask) {
    for (std::size_t i = 0; i < rows; ++i)
        softmax_row(x + i * cols, y + i * cols, cols, mask);
}

}  // namespace serial

bool solve_linear(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    // scale-aware pivot threshold
    double amax = 0.0;
    for (double x : a) amax = std::max(amax, std::fabs(x));
    const double tiny = (amax > 0 ? amax : 1.0) * 1e-12;

    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        double bestv = std::fabs(a[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double v = std::fabs(a[r * n + col]);
            if (v > bestv) {
                bestv = v;
                best = r;
            }
        }
        if (bestv < tiny) return false;
        if (best != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[col * n + j], a[best * n + j]);
            std::swap(b[col], b[best]);
        }
        const double pivot = a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r * n + col] / pivot;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i * n + j] * b[j];
        b[i] = s / a[i * n + i];
    }
    return true;
}

}  // namespace notesurv::kern
