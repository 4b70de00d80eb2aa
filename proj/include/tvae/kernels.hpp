#pragma once

// Dense row-major kernels behind the tensor primitives.
//
// Every kernel exists twice: a plain serial reference in kernels::serial and an
// OpenMP version in kernels::omp. The parallel versions split work over output
// rows only, so each output element is accumulated in the same order as the
// reference and results are bit-identical for any thread count.

#include <cstddef>
#include <span>

namespace tvae::kernels {

struct Dims {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

namespace serial {
/// C(m x n) = A(m x k) * B(k x n)
void gemm_nn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
/// C(m x n) = A(k x m)^T * B(k x n)
void gemm_tn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
/// C(m x n) = A(m x k) * B(n x k)^T
void gemm_nt(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
void tanh(std::span<const double> in, std::span<double> out);
void exp(std::span<const double> in, std::span<double> out);
}  // namespace serial

namespace omp {
void gemm_nn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
void gemm_tn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
void gemm_nt(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
void tanh(std::span<const double> in, std::span<double> out);
void exp(std::span<const double> in, std::span<double> out);
}  // namespace omp

// Dispatch used by the tensor engine. Small problems stay serial.
void gemm_nn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
void gemm_tn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
void gemm_nt(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c);
void tanh(std::span<const double> in, std::span<double> out);
void exp(std::span<const double> in, std::span<double> out);

/// Limit OpenMP threads used by the dispatching kernels on the calling thread.
void set_thread_limit(int threads);

}  // namespace tvae::kernels
