// Parallel tensor kernels against their serial reference versions.
//
//   bench_kernels --benchmark_filter=Contract

#include <benchmark/benchmark.h>

#include <array>
#include <random>

#include "rmarkov/oracle.hpp"
#include "rmarkov/tensor.hpp"

using namespace rmarkov;

namespace {

DenseTensor random_tensor(Shape shape, std::uint64_t seed) {
  DenseTensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (auto& x : t.data()) x = Complex(g(rng), g(rng));
  return t;
}

// Environment-times-site contraction shaped like a doubled-space sweep step.
template <bool Parallel>
void BM_Contract(benchmark::State& state) {
  const auto chi = static_cast<std::size_t>(state.range(0));
  const DenseTensor env = random_tensor({chi, chi}, 1);
  const DenseTensor site = random_tensor({chi, 4, chi}, 2);
  const std::array<AxisPair, 1> pairs{{{1, 0}}};
  for (auto _ : state) {
    DenseTensor out = Parallel ? contract(env, site, pairs) : reference::contract(env, site, pairs);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetComplexityN(state.range(0));
}

template <bool Parallel>
void BM_Permute(benchmark::State& state) {
  const auto chi = static_cast<std::size_t>(state.range(0));
  const DenseTensor t = random_tensor({chi, 4, 4, chi}, 3);
  const std::array<std::size_t, 4> perm{2, 0, 1, 3};
  for (auto _ : state) {
    DenseTensor out = Parallel ? t.permuted(perm) : reference::permute(t, perm);
    benchmark::DoNotOptimize(out.data().data());
  }
}

void BM_Svd(benchmark::State& state) {
  const auto chi = static_cast<std::size_t>(state.range(0));
  const DenseTensor t = random_tensor({chi, 4, 4, chi}, 4);
  const std::array<std::size_t, 2> left{0, 1};
  for (auto _ : state) {
    SvdSplit s = svd_split(t, left, {chi, 1e-12});
    benchmark::DoNotOptimize(s.s.data());
  }
}

void BM_EdSecondRenyi(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(dim, dim);
  const Eigen::MatrixXcd rho = (a * a.adjoint()) / (a * a.adjoint()).trace();
  std::vector<std::size_t> x;
  for (std::size_t q = 0; q < n / 2; ++q) x.push_back(q);
  for (auto _ : state) benchmark::DoNotOptimize(ed::ed_second_renyi(rho, x));
}

}  // namespace

BENCHMARK(BM_Contract<true>)->Name("Contract/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Contract<false>)->Name("Contract/serial_reference")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Permute<true>)->Name("Permute/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Permute<false>)->Name("Permute/serial_reference")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Svd)->Name("Svd")->RangeMultiplier(2)->Range(16, 64);
BENCHMARK(BM_EdSecondRenyi)->Name("EdSecondRenyi")->DenseRange(6, 10, 2);

BENCHMARK_MAIN();
