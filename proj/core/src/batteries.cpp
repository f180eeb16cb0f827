#include "excursion/batteries.hpp"

#include <algorithm>
#include <cmath>

#include "excursion/dgp_zoo.hpp"
#include "excursion/errors.hpp"
#include "excursion/format.hpp"
#include "excursion/properties.hpp"
#include "excursion/rng.hpp"

namespace excursion {

namespace {

std::string dgp_name(int index) { return "random-dgp-" + std::to_string(index); }

std::string describe(const std::vector<BlipTarget>& targets) {
  std::string out;
  for (const auto& t : targets) {
    out += (out.empty() ? "" : " ") + std::string("m=") + std::to_string(t.m) + ":" + format_number(t.blip);
    if (t.baseline) out += "(b=" + format_number(*t.baseline) + ")";
  }
  return out;
}

}  // namespace

int BatteryReport::count_as_expected() const {
  return static_cast<int>(std::count_if(cases.begin(), cases.end(), [](const BatteryCase& c) { return c.as_expected(); }));
}

int BatteryReport::count_unexpected() const { return static_cast<int>(cases.size()) - count_as_expected(); }

void BatteryReport::append(const BatteryReport& other) {
  cases.insert(cases.end(), other.cases.begin(), other.cases.end());
}

RandomTabularOptions battery_dgp_options(int index) {
  RandomTabularOptions o;
  o.horizon = 1 + index % 3;
  o.null_effect = index % 2 == 0;
  o.random_availability = index % 4 < 2;
  o.with_protocol = true;
  return o;
}

TabularSpec battery_dgp(std::uint64_t seed, int index) {
  return random_tabular_spec(derive_seed(seed, static_cast<std::uint64_t>(index)), battery_dgp_options(index));
}

BatteryReport weighted_average_battery(std::uint64_t seed, int n_dgps) {
  BatteryReport report;
  for (int i = 0; i < n_dgps; ++i) {
    const TabularModel model = make_tabular_model(battery_dgp(seed, i), dgp_name(i));
    const int horizon = model.spec.horizon;
    BatteryCase c{"weighted-average", dgp_name(i), true, false, ""};
    int checks = 0;
    double worst = 0.0;
    std::vector<Regime> regimes{Regime::constant(0, 0)};
    if (!battery_dgp_options(i).random_availability) regimes.push_back(Regime::carry_forward(0));
    for (int t = 0; t <= horizon; ++t) {
      std::vector<Summary> summaries{Summary::empty(), Summary::covariate(t)};
      if (t > 0) summaries.push_back(Summary::treatment(t - 1));
      for (const auto& g : regimes) {
        for (const auto& s : summaries) {
          const auto r = check_weighted_average(model.dgp, *model.protocol, g, t, horizon, s, 1e-9);
          ++checks;
          worst = std::max({worst, r.max_bracket_violation, r.max_identity_error});
          if (!r.passed) {
            c.passed = false;
            c.detail += "t=" + std::to_string(t) + " g=" + g.name() + " S=" + s.name() + ": " +
                        (r.failures.empty() ? r.summary() : r.failures.front()) + "; ";
          }
        }
      }
    }
    if (c.passed) c.detail = std::to_string(checks) + " checks, max error " + format_number(worst);
    report.cases.push_back(std::move(c));
  }
  return report;
}

BatteryReport null_preservation_battery(std::uint64_t seed, int n_dgps) {
  BatteryReport report;
  for (int i = 0; i < n_dgps; ++i) {
    if (!battery_dgp_options(i).null_effect) continue;
    const TabularModel model = make_tabular_model(battery_dgp(seed, i), dgp_name(i));
    const auto r = check_null_preservation(model.dgp, *model.protocol, model.spec.horizon, 1e-9);
    report.cases.push_back({"null-preservation", dgp_name(i), r.passed, false, r.summary()});
  }
  const TwoStepParams two_step{0.5};
  const auto r = check_null_preservation(two_step_dgp(two_step), two_step_protocol(two_step), 2, 1e-9);
  std::string detail = r.summary();
  if (!r.violations.empty()) {
    detail += "; first violation at t=" + std::to_string(r.violations.front().t) + ", blip " +
              format_number(r.violations.front().blip);
  }
  report.cases.push_back({"null-preservation", "two-step(theta=0.5)", r.passed, true, detail});
  return report;
}

BatteryReport variation_independence_battery(std::uint64_t seed, int admissible, int infeasible) {
  BatteryReport report;
  for (int i = 0; i < admissible; ++i) {
    CounterStream rng(seed, 0xadd, static_cast<std::uint64_t>(i));
    std::vector<BlipTarget> targets;
    // Draw until admissible: b * exp(sum of positive blips) <= 0.9.
    for (;;) {
      targets.clear();
      const bool pin = i % 2 == 0;
      const double b = 0.05 + 0.3 * rng.uniform();
      double positive = 0.0;
      for (int m = 0; m <= 2; ++m) {
        BlipTarget t{m, 3 - m, -1.0 + 2.0 * rng.uniform(), std::nullopt};
        if (m == 0 && pin) t.baseline = b;
        positive += std::max(t.blip, 0.0);
        targets.push_back(t);
      }
      if (!pin || b * std::exp(positive) <= 0.9) break;
    }
    ProbeOptions options;
    options.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    const ProbeResult r = variation_independence_probe(targets, options);
    report.cases.push_back({"variation-independence", "admissible-" + std::to_string(i),
                            r.status == ProbeStatus::feasible, false,
                            std::string(to_string(r.status)) + ", max residual " + format_number(r.max_residual) +
                                ", targets " + describe(targets)});
  }
  // Out-of-range sets: some regime's mean b * exp(sum of positive blips) exceeds 1,
  // or the pinned baseline is not a probability.
  const std::vector<std::vector<BlipTarget>> bad{
      {{1, 2, std::log(5.0), 0.5}, {2, 1, 0.0, std::nullopt}},
      {{0, 3, 0.2, 0.9}, {1, 2, 0.2, std::nullopt}, {2, 1, 0.2, std::nullopt}},
      {{0, 3, -0.5, 0.3}, {1, 2, 0.8, std::nullopt}, {2, 1, 0.7, std::nullopt}},
      {{2, 1, 0.1, 1.2}},
      {{0, 3, 2.0, 0.2}, {2, 1, -3.0, std::nullopt}},
  };
  for (int i = 0; i < infeasible; ++i) {
    const auto& targets = bad[static_cast<std::size_t>(i) % bad.size()];
    const ProbeResult r = variation_independence_probe(targets);
    report.cases.push_back({"variation-independence", "out-of-range-" + std::to_string(i),
                            r.status == ProbeStatus::infeasible && !r.certificate.empty(), false,
                            std::string(to_string(r.status)) + ": " + r.certificate + "; targets " +
                                describe(targets)});
  }
  return report;
}

}  // namespace excursion
