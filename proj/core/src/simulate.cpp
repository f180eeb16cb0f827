#include "excursion/simulate.hpp"

#include "excursion/errors.hpp"
#include "excursion/parallel.hpp"

namespace excursion {

namespace {

double draw_covariate(const CovariateLaw& law, CounterStream& rng) {
  if (const auto* d = std::get_if<DiscreteLaw>(&law)) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < d->probs.size(); ++i) {
      cum += d->probs[i];
      if (u < cum) return d->values[i];
    }
    // Rounding left u above the last cumulative sum: take the last positive cell.
    for (std::size_t i = d->probs.size(); i-- > 0;) {
      if (d->probs[i] > 0.0) return d->values[i];
    }
    return d->values.back();
  }
  if (const auto* g = std::get_if<GaussianLaw>(&law)) return g->mean + g->sd * rng.normal();
  return std::get<SampledLaw>(law).sample(rng);
}

// `treat` returns A_t for an available subject given (history, stream).
template <typename TreatFn>
Dataset simulate(const Dgp& dgp, const EligibilitySpec& eligibility, std::int64_t n, std::uint64_t seed,
                 const SimulationOptions& options, TreatFn treat) {
  if (n < 1) throw ValidationError("simulation needs n >= 1");
  const int horizon = dgp.horizon();
  Dataset data;
  data.horizon = horizon;
  data.subjects.assign(static_cast<std::size_t>(n), Trajectory(horizon));
  parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
    Trajectory& path = data.subjects[i];
    for (int t = 0; t <= horizon; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      CounterStream rng(seed, i, static_cast<std::uint64_t>(t));
      path.covariates[ti] = draw_covariate(dgp.covariate_law(path, t), rng);
      const History h = history_at(path, t);
      const int drawn = rng.bernoulli(dgp.availability_probability(path, t));
      path.availability[ti] = eligibility.availability(h, drawn);
      path.eligibility[ti] = eligibility.trial(h, path.availability[ti]);
      const double u = rng.uniform();
      const int a = treat(h, u);
      path.treatments[ti] = path.availability[ti] == 1 ? a : 0;
      path.outcomes[ti] = rng.bernoulli(dgp.outcome_probability(path, t));
    }
  });
  return data;
}

}  // namespace

Dataset simulate_sre(const Dgp& dgp, const Protocol& protocol, const EligibilitySpec& eligibility, std::int64_t n,
                     std::uint64_t seed, const SimulationOptions& options) {
  if (protocol.horizon() != dgp.horizon()) {
    throw ValidationError("protocol horizon " + std::to_string(protocol.horizon()) + " != DGP horizon " +
                          std::to_string(dgp.horizon()));
  }
  return simulate(dgp, eligibility, n, seed, options,
                  [&](const History& h, double u) { return u < protocol.probability(h) ? 1 : 0; });
}

Dataset simulate_regime(const Dgp& dgp, const Regime& regime, const EligibilitySpec& eligibility, std::int64_t n,
                        std::uint64_t seed, const SimulationOptions& options) {
  if (regime.start_time() != 0) throw UsageError("simulated regime must govern from t=0");
  return simulate(dgp, eligibility, n, seed, options,
                  [&](const History& h, double u) { return regime_action(regime, h, u); });
}

}  // namespace excursion
