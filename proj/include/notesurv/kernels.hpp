#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Dense numeric kernels. The OpenMP variants parallelize over independent
// output rows with a fixed serial inner loop, so results are bit-identical
// to the serial reference for any thread count. The serial versions are kept
// for tests and for the kernel benchmark.
namespace notesurv::kern {

// C(m x n) = A(m x k) * B(k x n), row-major
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
// C(m x n) = A(m x k) * B(n x k)^T
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
// C(m x n) = A(k x m)^T * B(k x n)
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);

// row-wise softmax with optional key mask (0 entries get weight exactly 0);
// every row must have at least one valid key
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols,
                  const std::uint8_t* mask);

namespace serial {
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols,
                  const std::uint8_t* mask);
}  // namespace serial

// Solve A x = b for dense square A by partial-pivot LU. A and b are
// overwritten; returns false if a pivot is (near) zero.
bool solve_linear(std::vector<double>& a, std::vector<double>& b, std::size_t n);

}  // namespace notesurv::kern
