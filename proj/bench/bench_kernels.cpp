#include <benchmark/benchmark.h>

#include <vector>

#include "tvae/kernels.hpp"
#include "tvae/rng.hpp"

namespace {

using tvae::kernels::Dims;

std::vector<double> random_matrix(std::size_t n, std::uint64_t seed) {
  tvae::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

template <auto Gemm>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n * n, 1);
  const auto b = random_matrix(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Gemm(a, Dims{n, n}, b, Dims{n, n}, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <auto Unary>
void BM_unary(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 3);
  std::vector<double> out(n);
  for (auto _ : state) {
    Unary(a, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

}  // namespace

BENCHMARK(BM_gemm<tvae::kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_gemm<tvae::kernels::omp::gemm_nn>)->Name("gemm_nn/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_gemm<tvae::kernels::serial::gemm_tn>)->Name("gemm_tn/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_gemm<tvae::kernels::omp::gemm_tn>)->Name("gemm_tn/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_gemm<tvae::kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_gemm<tvae::kernels::omp::gemm_nt>)->Name("gemm_nt/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_unary<tvae::kernels::serial::tanh>)->Name("tanh/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_unary<tvae::kernels::omp::tanh>)->Name("tanh/omp")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_unary<tvae::kernels::serial::exp>)->Name("exp/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_unary<tvae::kernels::omp::exp>)->Name("exp/omp")->Arg(1 << 16)->Arg(1 << 20);

BENCHMARK_MAIN();
