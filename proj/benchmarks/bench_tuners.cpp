#include <hotuner/numeric.hpp>
#include <hotuner/regress.hpp>
#include <hotuner/tuners.hpp>

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace hotuner;

namespace {

std::vector<regress::RegressorSample> make_samples(int dim, int count) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  ParameterVector tstar(dim);
  for (int i = 0; i < dim; ++i) tstar[i] = dist(rng);

  std::vector<regress::RegressorSample> samples;
  samples.reserve(count);
  for (int k = 1; k <= count; ++k) {
    ParameterVector phi(dim);
    for (int i = 0; i < dim; ++i) phi[i] = dist(rng);
    const double y = dot_lr(phi, tstar);
    samples.push_back(regress::make_sample(k, std::move(phi), y));
  }
  return samples;
}

tuners::HyperParams params_for(tuners::Algorithm alg) {
  tuners::HyperParams hp;
  hp.algorithm = alg;
  hp.alpha = 0.0469;
  hp.beta = 0.5;
  hp.gamma = alg == tuners::Algorithm::kNA ? 0.09 : 0.0938;
  return hp;
}

void step_loop(benchmark::State& bench, tuners::Algorithm alg) {
  const int dim = static_cast<int>(bench.range(0));
  const auto samples = make_samples(dim, 256);
  const auto hp = params_for(alg);
  tuners::TunerState state = tuners::make_state(ParameterVector::Zero(dim));

  std::size_t i = 0;
  for (auto _ : bench) {
    auto [next, diag] = tuners::step(state, samples[i], hp);
    benchmark::DoNotOptimize(diag.e_y);
    state = std::move(next);
    state.k = 1;  // keep the step counter bounded across iterations
    i = (i + 1) & 255;
  }
  bench.SetItemsProcessed(static_cast<int64_t>(bench.iterations()));
}

void BM_StepNGD(benchmark::State& s) { step_loop(s, tuners::Algorithm::kNGD); }
void BM_StepHB(benchmark::State& s) { step_loop(s, tuners::Algorithm::kHB); }
void BM_StepNA(benchmark::State& s) { step_loop(s, tuners::Algorithm::kNA); }
void BM_StepHBClassical(benchmark::State& s) {
  step_loop(s, tuners::Algorithm::kHBClassical);
}
void BM_StepNAClassical(benchmark::State& s) {
  step_loop(s, tuners::Algorithm::kNAClassical);
}

}  // namespace

BENCHMARK(BM_StepNGD)->Arg(3)->Arg(32)->Arg(256);
BENCHMARK(BM_StepHB)->Arg(3)->Arg(32)->Arg(256);
BENCHMARK(BM_StepNA)->Arg(3)->Arg(32)->Arg(256);
BENCHMARK(BM_StepHBClassical)->Arg(3)->Arg(32);
BENCHMARK(BM_StepNAClassical)->Arg(3)->Arg(32);

BENCHMARK_MAIN();
