#include <benchmark/benchmark.h>

#include <random>

#include "mll/kernels.hpp"
#include "mll/marginal.hpp"
#include "mll/tables.hpp"

using namespace mll;

namespace {

std::vector<double> random_vector(int n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> v(std::size_t{1} << n);
  for (double& x : v) x = u(rng);
  return v;
}

/// Effect L in margin L ∪ {first variable}: a complete collection with many margins.
MLLSpec wide_spec(int n) {
  std::vector<EffectMarginPair> pairs;
  for (Subset L = 1; L < (Subset{1} << n); ++L) pairs.push_back({L, L | 1});
  return MLLSpec(VarSet::numbered(n), pairs);
}

void BM_WalshHadamard(benchmark::State& state) {
  auto v = random_vector(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    kernels::walsh_hadamard(v);
    benchmark::DoNotOptimize(v.data());
  }
}

void BM_WalshHadamardReference(benchmark::State& state) {
  const auto v = random_vector(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::walsh_hadamard_reference(v));
}

void BM_MarginalSums(benchmark::State& state) {
  const auto p = random_vector(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::marginal_sums(p, 0b10101));
}

void BM_MarginalSumsReference(benchmark::State& state) {
  const auto p = random_vector(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::marginal_sums_reference(p, 0b10101));
}

void BM_Jacobian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  const auto t = random_table(VarSet::numbered(n), rng);
  const auto sp = wide_spec(n);
  for (auto _ : state) benchmark::DoNotOptimize(jacobian(t, sp));
}

void BM_JacobianReference(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  const auto t = random_table(VarSet::numbered(n), rng);
  const auto sp = wide_spec(n);
  for (auto _ : state) benchmark::DoNotOptimize(jacobian_reference(t, sp));
}

}  // namespace

BENCHMARK(BM_WalshHadamard)->DenseRange(12, 20, 4);
BENCHMARK(BM_WalshHadamardReference)->Arg(12);
BENCHMARK(BM_MarginalSums)->DenseRange(12, 20, 4);
BENCHMARK(BM_MarginalSumsReference)->DenseRange(12, 20, 4);
BENCHMARK(BM_Jacobian)->DenseRange(4, 8, 2);
BENCHMARK(BM_JacobianReference)->DenseRange(4, 8, 2);

BENCHMARK_MAIN();
