#include <hotuner/analysis.hpp>
#include <hotuner/regress.hpp>

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace hotuner;

namespace {

std::vector<regress::RegressorSample> bank_samples(long horizon) {
  regress::RegressorSource src;
  src.kind = regress::RegressorSource::Kind::kSinusoidBank;
  src.components = {{1.0, 0.0, 0.0, 0.0}, {0.0, 2.0, 1.0, 0.0}, {0.0, 2.0, 2.0, 0.0}};
  ParameterVector tstar(3);
  tstar << 20.0, -3.0, 1.0;
  return regress::regressor_stream(src, tstar, horizon);
}

// The dominant cost of a full run with analysis enabled: one sphere descent
// per window per seed.
void BM_PeEpsilon(benchmark::State& bench) {
  const auto samples = bank_samples(bench.range(0));
  for (auto _ : bench) {
    const auto pe = analysis::pe_epsilon(samples, 20);
    benchmark::DoNotOptimize(pe.epsilon);
  }
}

void BM_RateBoundHB(benchmark::State& bench) {
  const auto pe = analysis::pe_epsilon(bank_samples(100), 20);
  for (auto _ : bench) {
    const auto rate = analysis::rate_bound_hb(pe, 0.5, 0.0938);
    benchmark::DoNotOptimize(rate.mu);
  }
}

void BM_RateBoundNA(benchmark::State& bench) {
  const auto pe = analysis::pe_epsilon(bank_samples(100), 20);
  for (auto _ : bench) {
    const auto rate = analysis::rate_bound_na(pe, 0.5, 0.09, 20);
    benchmark::DoNotOptimize(rate.mu);
  }
}

void BM_CheckEnvelope(benchmark::State& bench) {
  std::vector<double> v;
  v.reserve(2000);
  double x = 100.0;
  for (int k = 0; k < 2000; ++k) {
    v.push_back(x);
    x *= 0.995;
  }
  for (auto _ : bench) {
    const auto env = analysis::check_envelope(v, 1e-3, 20, 1e-9);
    benchmark::DoNotOptimize(env.max_ratio);
  }
}

}  // namespace

BENCHMARK(BM_PeEpsilon)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RateBoundHB)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RateBoundNA)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CheckEnvelope);
