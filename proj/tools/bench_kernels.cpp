// Benchmark of the OpenMP kernels against their serial references.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "notesurv/kernels.hpp"
#include "notesurv/metrics.hpp"
#include "notesurv/rng.hpp"

using namespace notesurv;
using clock_type = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& f, int reps) {
    f();  // warm up
    auto t0 = clock_type::now();
    for (int r = 0; r < reps; ++r) f();
    auto t1 = clock_type::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void fill(std::vector<double>& v, Rng& rng) {
    for (double& x : v) x = rng.normal();
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp\n");
#endif

    Rng rng(7);
    std::printf("%-22s %10s %10s %8s\n", "kernel", "serial ms", "parallel", "speedup");

    for (std::size_t n : {128u, 256u, 512u}) {
        std::vector<double> a(n * n), b(n * n), c(n * n), c2(n * n);
        fill(a, rng);
        fill(b, rng);
        double ts = time_ms([&] { kern::serial::gemm_nn(a.data(), b.data(), c.data(), n, n, n); }, 3);
        double tp = time_ms([&] { kern::gemm_nn(a.data(), b.data(), c2.data(), n, n, n); }, 3);
        bool same = c == c2;  // row-parallel kernels are bit-identical
        std::printf("gemm_nn %4zu           %10.3f %10.3f %7.2fx%s\n", n, ts, tp, ts / tp,
                    same ? "" : "  MISMATCH");
    }

    {
        const std::size_t rows = 4096, cols = 512;
        std::vector<double> x(rows * cols), y(rows * cols), y2(rows * cols);
        fill(x, rng);
        double ts = time_ms(
            [&] { kern::serial::softmax_rows(x.data(), y.data(), rows, cols, nullptr); }, 5);
        double tp =
            time_ms([&] { kern::softmax_rows(x.data(), y2.data(), rows, cols, nullptr); }, 5);
        std::printf("softmax 4096x512       %10.3f %10.3f %7.2fx%s\n", ts, tp, ts / tp,
                    y == y2 ? "" : "  MISMATCH");
    }

    {
        // pair-counting concordance at n = 6000 (O(n^2) inner loop)
        const std::size_t n = 6000;
        std::vector<double> risks(n), times(n), events(n);
        for (std::size_t i = 0; i < n; ++i) {
            risks[i] = rng.normal();
            times[i] = rng.exponential(0.1);
            events[i] = rng.bernoulli(0.7) ? 1.0 : 0.0;
        }
        double tp = time_ms([&] { (void)c_index(risks, times, events); }, 3);
        std::printf("c_index 6000 (omp)     %10s %10.3f\n", "-", tp);
    }
    return 0;
}
