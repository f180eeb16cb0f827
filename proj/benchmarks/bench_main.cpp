#include <benchmark/benchmark.h>

#include <memory>

#include "excursion/batteries.hpp"
#include "excursion/dgp_zoo.hpp"
#include "excursion/estimator.hpp"
#include "excursion/oracle.hpp"
#include "excursion/simulate.hpp"

using namespace excursion;

namespace {

void BM_SimulateTwoStep(benchmark::State& state) {
  const TwoStepParams p{0.5};
  const Dgp dgp = two_step_dgp(p);
  const Protocol protocol = two_step_protocol(p);
  const auto threads = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_sre(dgp, protocol, EligibilitySpec::all_eligible(), state.range(0), 1, {threads}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateTwoStep)->Args({20000, 1})->Args({20000, 4})->Unit(benchmark::kMillisecond);

void BM_OracleEffectModifier(benchmark::State& state) {
  EffectModifierParams p;
  p.quadrature_nodes = static_cast<int>(state.range(0));
  const Dgp dgp = effect_modifier_dgp(p);
  const Protocol protocol = effect_modifier_protocol(p);
  EstimandSpec spec;
  spec.t = 2;
  spec.summary = Summary::covariate(2);
  for (auto _ : state) benchmark::DoNotOptimize(excursion_blip(dgp, protocol, spec));
}
BENCHMARK(BM_OracleEffectModifier)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_OracleRandomTabular(benchmark::State& state) {
  RandomTabularOptions o;
  o.horizon = static_cast<int>(state.range(0));
  const TabularModel m = make_tabular_model(random_tabular_spec(3, o));
  for (auto _ : state) {
    benchmark::DoNotOptimize(excursion_blip(m.dgp, *m.protocol, EstimandSpec::at_endpoint(0, o.horizon, Summary::full_history())));
  }
}
BENCHMARK(BM_OracleRandomTabular)->DenseRange(1, 5)->Unit(benchmark::kMicrosecond);

void BM_FitTwoStep(benchmark::State& state) {
  const TwoStepParams p{0.5};
  const Protocol protocol = two_step_protocol(p);
  const auto data = std::make_shared<const Dataset>(
      simulate_sre(two_step_dgp(p), protocol, EligibilitySpec::all_eligible(), 20000, 1));
  EmulationOptions options;
  options.mode = state.range(0) ? PropensityMode::estimated : PropensityMode::known;
  options.enrollment_time = 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(emulate_series(data, EligibilitySpec::all_eligible(), 1, Summary::treatment(1), &protocol, options));
  }
}
BENCHMARK(BM_FitTwoStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
