#include "tvae/kernels.hpp"

#include <cmath>
#include <vector>

#include <omp.h>

#include "tvae/errors.hpp"

namespace tvae::kernels {
namespace {

void check_nn(Dims da, Dims db, std::size_t a, std::size_t b, std::size_t c) {
  if (da.cols != db.rows || a != da.rows * da.cols || b != db.rows * db.cols ||
      c != da.rows * db.cols) {
    throw ContractError("gemm_nn: dimension mismatch");
  }
}

void check_tn(Dims da, Dims db, std::size_t a, std::size_t b, std::size_t c) {
  if (da.rows != db.rows || a != da.rows * da.cols || b != db.rows * db.cols ||
      c != da.cols * db.cols) {
    throw ContractError("gemm_tn: dimension mismatch");
  }
}

void check_nt(Dims da, Dims db, std::size_t a, std::size_t b, std::size_t c) {
  if (da.cols != db.cols || a != da.rows * da.cols || b != db.rows * db.cols ||
      c != da.rows * db.rows) {
    throw ContractError("gemm_nt: dimension mismatch");
  }
}

// Row i of C = sum_k A[i,k] * B[k,:], accumulated for k ascending.
inline void nn_row(const double* a, std::size_t k_dim, const double* b, std::size_t n,
                   double* c) {
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.0;
  for (std::size_t k = 0; k < k_dim; ++k) {
    const double aik = a[k];
    if (aik == 0.0) continue;
    const double* brow = b + k * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += aik * brow[j];
  }
}

// Row m of C = sum_r A[r,m] * B[r,:], accumulated for r ascending.
inline void tn_row(const double* a, std::size_t m_dim, std::size_t m, std::size_t r_dim,
                   const double* b, std::size_t n, double* c) {
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.0;
  for (std::size_t r = 0; r < r_dim; ++r) {
    const double arm = a[r * m_dim + m];
    if (arm == 0.0) continue;
    const double* brow = b + r * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += arm * brow[j];
  }
}

std::vector<double> transpose(std::span<const double> b, Dims db) {
  std::vector<double> t(b.size());
  for (std::size_t i = 0; i < db.rows; ++i)
    for (std::size_t j = 0; j < db.cols; ++j) t[j * db.rows + i] = b[i * db.cols + j];
  return t;
}

thread_local int t_thread_limit = 0;

constexpr std::size_t kParallelWork = 1u << 15;

}  // namespace

namespace serial {

void gemm_nn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  check_nn(da, db, a.size(), b.size(), c.size());
  for (std::size_t i = 0; i < da.rows; ++i)
    nn_row(a.data() + i * da.cols, da.cols, b.data(), db.cols, c.data() + i * db.cols);
}

void gemm_tn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  check_tn(da, db, a.size(), b.size(), c.size());
  for (std::size_t m = 0; m < da.cols; ++m)
    tn_row(a.data(), da.cols, m, da.rows, b.data(), db.cols, c.data() + m * db.cols);
}

void gemm_nt(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  check_nt(da, db, a.size(), b.size(), c.size());
  const auto bt = transpose(b, db);
  serial::gemm_nn(a, da, bt, Dims{db.cols, db.rows}, c);
}

void tanh(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
}

void exp(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
}

}  // namespace serial

namespace omp {

void gemm_nn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  check_nn(da, db, a.size(), b.size(), c.size());
  const auto rows = static_cast<std::ptrdiff_t>(da.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    nn_row(a.data() + i * da.cols, da.cols, b.data(), db.cols, c.data() + i * db.cols);
}

void gemm_tn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  check_tn(da, db, a.size(), b.size(), c.size());
  const auto rows = static_cast<std::ptrdiff_t>(da.cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t m = 0; m < rows; ++m)
    tn_row(a.data(), da.cols, m, da.rows, b.data(), db.cols, c.data() + m * db.cols);
}

void gemm_nt(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  check_nt(da, db, a.size(), b.size(), c.size());
  const auto bt = transpose(b, db);
  omp::gemm_nn(a, da, bt, Dims{db.cols, db.rows}, c);
}

void tanh(std::span<const double> in, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

void exp(std::span<const double> in, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
}

}  // namespace omp

namespace {
bool use_parallel(std::size_t work) {
  if (work < kParallelWork) return false;
  if (t_thread_limit == 1) return false;
  if (t_thread_limit > 1) omp_set_num_threads(t_thread_limit);
  return omp_get_max_threads() > 1;
}
}  // namespace

void gemm_nn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  if (use_parallel(da.rows * da.cols * db.cols)) return omp::gemm_nn(a, da, b, db, c);
  serial::gemm_nn(a, da, b, db, c);
}

void gemm_tn(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  if (use_parallel(da.rows * da.cols * db.cols)) return omp::gemm_tn(a, da, b, db, c);
  serial::gemm_tn(a, da, b, db, c);
}

void gemm_nt(std::span<const double> a, Dims da, std::span<const double> b, Dims db,
             std::span<double> c) {
  if (use_parallel(da.rows * da.cols * db.rows)) return omp::gemm_nt(a, da, b, db, c);
  serial::gemm_nt(a, da, b, db, c);
}

void tanh(std::span<const double> in, std::span<double> out) {
  if (use_parallel(in.size() * 16)) return omp::tanh(in, out);
  serial::tanh(in, out);
}

void exp(std::span<const double> in, std::span<double> out) {
  if (use_parallel(in.size() * 16)) return omp::exp(in, out);
  serial::exp(in, out);
}

void set_thread_limit(int threads) { t_thread_limit = threads; }

}  // namespace tvae::kernels
