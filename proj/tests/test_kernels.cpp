#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "notesurv/kernels.hpp"
#include "notesurv/rng.hpp"

using namespace notesurv;

namespace {
std::vector<double> randvec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}
}  // namespace

TEST_CASE("parallel gemm variants match the serial reference bit for bit") {
    Rng rng(11);
    for (auto [m, k, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{3, 4, 5},
                           {64, 48, 96},
                           {130, 70, 90}}) {
        auto a = randvec(m * k, rng);
        auto b = randvec(k * n, rng);
        std::vector<double> c1(m * n), c2(m * n);

        kern::serial::gemm_nn(a.data(), b.data(), c1.data(), m, k, n);
        kern::gemm_nn(a.data(), b.data(), c2.data(), m, k, n);
        CHECK(c1 == c2);

        auto bt = randvec(n * k, rng);
        kern::serial::gemm_nt(a.data(), bt.data(), c1.data(), m, k, n);
        kern::gemm_nt(a.data(), bt.data(), c2.data(), m, k, n);
        CHECK(c1 == c2);

        auto at = randvec(k * m, rng);
        kern::serial::gemm_tn(at.data(), b.data(), c1.data(), m, k, n);
        kern::gemm_tn(at.data(), b.data(), c2.data(), m, k, n);
        CHECK(c1 == c2);
    }
}

TEST_CASE("gemm_nn against a hand example") {
    // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
    std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4);
    kern::gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2);
    CHECK(c == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("gemm_nt and gemm_tn agree with explicit transposition") {
    Rng rng(5);
    const std::size_t m = 7, k = 3, n = 6;
    auto a = randvec(m * k, rng);
    auto b = randvec(k * n, rng);
    std::vector<double> bt(n * k), at(k * m);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];

    std::vector<double> c_ref(m * n), c_nt(m * n), c_tn(m * n);
    kern::gemm_nn(a.data(), b.data(), c_ref.data(), m, k, n);
    kern::gemm_nt(a.data(), bt.data(), c_nt.data(), m, k, n);
    kern::gemm_tn(at.data(), b.data(), c_tn.data(), m, k, n);
    for (std::size_t i = 0; i < m * n; ++i) {
        CHECK(c_nt[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
        CHECK(c_tn[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("softmax kernel: rows sum to one, masked keys get exact zero") {
    Rng rng(3);
    const std::size_t rows = 9, cols = 12;
    auto x = randvec(rows * cols, rng);
    std::vector<std::uint8_t> mask(cols, 1);
    mask[2] = mask[7] = 0;
    std::vector<double> y(rows * cols), ys(rows * cols);
    kern::softmax_rows(x.data(), y.data(), rows, cols, mask.data());
    kern::serial::softmax_rows(x.data(), ys.data(), rows, cols, mask.data());
    CHECK(y == ys);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += y[r * cols + c];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(y[r * cols + 2] == 0.0);
        CHECK(y[r * cols + 7] == 0.0);
    }
}

TEST_CASE("solve_linear recovers a known solution and flags singularity") {
    std::vector<double> a{2, 1, 1, 3};  // [2 1; 1 3]
    std::vector<double> b{5, 10};       // x = (1, 3)
    REQUIRE(kern::solve_linear(a, b, 2));
    CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b[1] == doctest::Approx(3.0).epsilon(1e-12));

    std::vector<double> s{1, 2, 2, 4};  // rank 1
    std::vector<double> rhs{1, 2};
    CHECK_FALSE(kern::solve_linear(s, rhs, 2));

    // random spot check against residuals
    Rng rng(17);
    const std::size_t n = 8;
    std::vector<double> m(n * n), x0(n);
    for (double& v : m) v = rng.normal();
    for (double& v : x0) v = rng.normal();
    std::vector<double> rhs2(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) rhs2[i] += m[i * n + j] * x0[j];
    std::vector<double> mc = m;
    REQUIRE(kern::solve_linear(mc, rhs2, n));
    for (std::size_t i = 0; i < n; ++i)
        CHECK(rhs2[i] == doctest::Approx(x0[i]).epsilon(1e-8));
}
