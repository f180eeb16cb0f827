#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "excursion/batteries.hpp"
#include "excursion/dgp_zoo.hpp"
#include "excursion/errors.hpp"
#include "excursion/oracle.hpp"
#include "excursion/simulate.hpp"
#include "helpers.hpp"

using namespace excursion;

namespace {

const double e = std::exp(1.0);

// Plain recursive enumeration over binary-covariate DGPs, independent of the
// library enumerator. Before `t` actions follow the protocol (forced to 0 when
// unavailable); from `t` on they are `actions[s - t]`, or 0 past the list.
// Returns E{Y_k 1(I*_t = 1)} / P(I*_t = 1).
struct Brute {
  const Dgp& dgp;
  const Protocol& protocol;
  int t;
  std::vector<int> actions;
  int k;
  double num = 0, den = 0;

  void walk(Trajectory& path, int s, double mass) {
    if (mass == 0.0) return;
    const auto si = static_cast<std::size_t>(s);
    const auto law = std::get<DiscreteLaw>(dgp.covariate_law(path, s));
    for (std::size_t v = 0; v < law.values.size(); ++v) {
      path.covariates[si] = law.values[v];
      const double q = dgp.availability_probability(path, s);
      for (int istar = 0; istar < 2; ++istar) {
        const double m1 = mass * law.probs[v] * (istar ? q : 1.0 - q);
        // Only paths with I*_t = 1 enter the conditioning event.
        if (m1 == 0.0 || (s == t && istar == 0)) continue;
        path.availability[si] = path.eligibility[si] = istar;
        for (int a = 0; a < 2; ++a) {
          double pa;
          if (s < t) {
            const double p = istar ? protocol.probability(history_at(path, s)) : 0.0;
            pa = a ? p : 1.0 - p;
          } else {
            const int want = s - t < static_cast<int>(actions.size()) ? actions[static_cast<std::size_t>(s - t)] : 0;
            REQUIRE((want == 0 || istar == 1));
            pa = a == want ? 1.0 : 0.0;
          }
          if (pa == 0.0) continue;
          path.treatments[si] = a;
          const double py = dgp.outcome_probability(path, s);
          if (s == k) {
            num += m1 * pa * py;
            den += m1 * pa;
            continue;
          }
          for (int y = 0; y < 2; ++y) {
            path.outcomes[si] = y;
            walk(path, s + 1, m1 * pa * (y ? py : 1.0 - py));
          }
          path.outcomes[si] = 0;
        }
        path.treatments[si] = 0;
      }
    }
  }

  double mean() {
    Trajectory path(dgp.horizon());
    walk(path, 0, 1.0);
    return num / den;
  }
};

double mc_mean(const Dgp& dgp, const Regime& regime, int k, std::int64_t n, std::uint64_t seed, double& se) {
  const Dataset d = simulate_regime(dgp, regime, EligibilitySpec::all_eligible(), n, seed);
  double y = 0;
  for (const auto& s : d.subjects) y += s.outcomes[static_cast<std::size_t>(k)];
  const double m = y / static_cast<double>(n);
  se = testing::binomial_se(m, static_cast<double>(n));
  return m;
}

EstimandSpec spec_at(int t, int delta, Summary s = Summary::empty()) {
  EstimandSpec spec;
  spec.t = t;
  spec.delta = delta;
  spec.summary = std::move(s);
  return spec;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("counterfactual means of the two-step DGP") {
    for (double theta : {0.0, 0.3, 0.5, 1.0}) {
      const TwoStepParams p{theta};
      const Dgp dgp = two_step_dgp(p);
      const Protocol protocol = two_step_protocol(p);
      CHECK(std::abs(counterfactual_mean(dgp, excursion_regime(protocol, 2, {0}), 2) - 0.25) < 1e-12);
      const double treated = counterfactual_mean(dgp, excursion_regime(protocol, 2, {1}), 2);
      CHECK(std::abs(treated - ((1 - theta) / e + theta * e) / 4) < 1e-12);
    }
  }

  TEST_CASE("marginal blip equals the closed form") {
    for (double theta : {0.0, 0.1, 1.0 / (1.0 + e), 0.5, 0.9, 1.0}) {
      const TwoStepParams p{theta};
      const double b = excursion_blip(two_step_dgp(p), two_step_protocol(p), spec_at(2, 1)).marginal();
      CHECK(std::abs(b - two_step_closed_form_beta(theta)) < 1e-12);
    }
  }

  TEST_CASE("protocol dependence") {
    std::vector<double> marginal, given_a1;
    for (double theta : {0.1, 1.0 / (1.0 + e), 0.9}) {
      const TwoStepParams p{theta};
      marginal.push_back(excursion_blip(two_step_dgp(p), two_step_protocol(p), spec_at(2, 1)).marginal());
      const BlipTable s = excursion_blip(two_step_dgp(p), two_step_protocol(p), spec_at(2, 1, Summary::treatment(1)));
      REQUIRE(s.entries.size() == 2);
      given_a1.push_back(s.at({0}).blip);
      given_a1.push_back(s.at({1}).blip);
    }
    CHECK(marginal[0] < 0);
    CHECK(std::abs(marginal[1]) < 1e-12);
    CHECK(marginal[2] > 0);
    for (std::size_t i = 0; i < given_a1.size(); i += 2) {
      CHECK(std::abs(given_a1[i] + 1) < 1e-12);
      CHECK(std::abs(given_a1[i + 1] - 1) < 1e-12);
    }
  }

  TEST_CASE("full-history summary on the two-step DGP") {
    const TwoStepParams p{0.3};
    const BlipTable t = excursion_blip(two_step_dgp(p), two_step_protocol(p), spec_at(2, 1, Summary::full_history()));
    REQUIRE(t.entries.size() == 2);
    for (const auto& entry : t.entries) {
      CHECK(std::abs(entry.blip - two_step_conditional_blip(entry.representative.treatment(1))) < 1e-12);
    }
  }

  TEST_CASE("continuous versus never") {
    const TwoStepParams p{0.5};
    const Dgp dgp = two_step_dgp(p);
    const Protocol protocol = two_step_protocol(p);
    CHECK(std::abs(continuous_vs_never_blip(dgp, protocol, spec_at(1, 2)).marginal() - 1.0) < 1e-12);
    const BlipTable a = continuous_vs_never_blip(dgp, protocol, spec_at(2, 1, Summary::treatment(1)));
    const BlipTable b = excursion_blip(dgp, protocol, spec_at(2, 1, Summary::treatment(1)));
    for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].blip == b.entries[i].blip);
    const TabularModel null = load_tabular_model_file(testing::config_path("null.dgp"));
    EstimandSpec s = spec_at(0, 3, Summary::covariate(0));
    CHECK_THROWS_AS(continuous_vs_never_blip(null.dgp, *null.protocol, s), IdentificationError);
    s = spec_at(1, 2, Summary::covariate(1));
    for (const auto& entry : excursion_blip(null.dgp, *null.protocol, s).entries) CHECK(std::abs(entry.blip) < 1e-12);
  }

  TEST_CASE("regime-specific blips") {
    const TwoStepParams p{0.5};
    const Dgp dgp = two_step_dgp(p);
    const Protocol protocol = two_step_protocol(p);
    CHECK(std::abs(regime_blip(dgp, protocol, Regime::constant(0, 0), 1, 2, Summary::empty()).marginal()) < 1e-12);
    CHECK(std::abs(regime_blip(dgp, protocol, Regime::carry_forward(0), 1, 2, Summary::empty()).marginal() - 1.0) < 1e-12);
    const BlipTable h = regime_blip(dgp, protocol, Regime::constant(0, 0), 2, 2, Summary::full_history());
    const BlipTable x = excursion_blip(dgp, protocol, spec_at(2, 1, Summary::full_history()));
    REQUIRE(h.entries.size() == x.entries.size());
    for (std::size_t i = 0; i < h.entries.size(); ++i) CHECK(h.entries[i].blip == x.entries[i].blip);
  }

  TEST_CASE("regime blips reduce to the two excursion contrasts") {
    for (int i = 0; i < 24; ++i) {
      RandomTabularOptions o = battery_dgp_options(i);
      o.random_availability = false;
      const TabularModel m = make_tabular_model(random_tabular_spec(derive_seed(77, static_cast<std::uint64_t>(i)), o));
      const int T = m.spec.horizon;
      for (int t = 0; t <= T; ++t) {
        for (const Summary& s : {Summary::empty(), Summary::full_history()}) {
          const EstimandSpec spec = EstimandSpec::at_endpoint(t, T, s);
          const BlipTable zero = regime_blip(m.dgp, *m.protocol, Regime::constant(0, 0), t, T, s);
          const BlipTable carry = regime_blip(m.dgp, *m.protocol, Regime::carry_forward(0), t, T, s);
          const BlipTable exc = excursion_blip(m.dgp, *m.protocol, spec);
          const BlipTable con = continuous_vs_never_blip(m.dgp, *m.protocol, spec);
          REQUIRE(zero.entries.size() == exc.entries.size());
          for (std::size_t j = 0; j < exc.entries.size(); ++j) {
            CHECK(std::abs(zero.entries[j].blip - exc.entries[j].blip) <= 1e-12);
            CHECK(std::abs(carry.entries[j].blip - con.entries[j].blip) <= 1e-12);
          }
        }
      }
    }
  }

  TEST_CASE("reparametrized endpoints agree") {
    const TabularModel m = make_tabular_model(battery_dgp(3, 5));
    const int T = m.spec.horizon;
    for (int t = 0; t <= T; ++t) {
      for (int k = t; k <= T; ++k) {
        const BlipTable a = excursion_blip(m.dgp, *m.protocol, EstimandSpec::at_endpoint(t, k, Summary::covariate(t)));
        const BlipTable b = excursion_blip(m.dgp, *m.protocol, spec_at(t, k - t + 1, Summary::covariate(t)));
        REQUIRE(a.entries.size() == b.entries.size());
        for (std::size_t j = 0; j < a.entries.size(); ++j) CHECK(a.entries[j].blip == b.entries[j].blip);
      }
    }
    CHECK_THROWS_AS(EstimandSpec::at_endpoint(2, 1), RangeError);
  }

  TEST_CASE("enumeration agrees with a plain recursive oracle") {
    for (int i = 0; i < 30; ++i) {
      const TabularModel m = make_tabular_model(battery_dgp(123, i));
      const int T = m.spec.horizon;
      for (int t = 0; t <= T; ++t) {
        const bool random_av = battery_dgp_options(i).random_availability;
        Brute treat{m.dgp, *m.protocol, t, {1}, T};
        Brute ctrl{m.dgp, *m.protocol, t, {0}, T};
        const double expected = std::log(treat.mean() / ctrl.mean());
        CHECK(std::abs(excursion_blip(m.dgp, *m.protocol, EstimandSpec::at_endpoint(t, T)).marginal() - expected) < 1e-12);
        if (!random_av) {
          Brute always{m.dgp, *m.protocol, 0, std::vector<int>(static_cast<std::size_t>(T + 1), 1), T};
          CHECK(std::abs(counterfactual_mean(m.dgp, Regime::constant(0, 1), T) - always.mean()) < 1e-12);
        }
      }
    }
  }

  TEST_CASE("oracle agrees with Monte Carlo") {
    double se = 0;
    const TwoStepParams p{0.5};
    const Dgp two = two_step_dgp(p);
    const Protocol proto = two_step_protocol(p);
    const std::vector<Regime> regimes{excursion_regime(proto, 2, {1}), excursion_regime(proto, 2, {0}),
                                      excursion_regime(proto, 1, {1, 1}),
                                      excursion_regime(proto, 1, {1}, Regime::carry_forward(0))};
    std::uint64_t seed = 100;
    for (const auto& r : regimes) {
      const double mc = mc_mean(two, r, 2, 100000, ++seed, se);
      CHECK(std::abs(mc - counterfactual_mean(two, r, 2)) <= 4 * se);
    }
    const EffectModifierParams ep;
    const Dgp em = effect_modifier_dgp(ep);
    const Protocol emp = effect_modifier_protocol(ep);
    for (const auto& r : {excursion_regime(emp, 2, {1}), Regime::static_path(0, {0, 0, 1}), Regime::static_path(0, {0, 1, 1})}) {
      const double mc = mc_mean(em, r, 2, 100000, ++seed, se);
      CHECK(std::abs(mc - counterfactual_mean(em, r, 2)) <= 4 * se);
    }
    const TabularModel null = load_tabular_model_file(testing::config_path("null.dgp"));
    const Regime r = excursion_regime(*null.protocol, 1, {0}, Regime::from_protocol(*null.protocol));
    const double mc = mc_mean(null.dgp, r, 2, 100000, ++seed, se);
    CHECK(std::abs(mc - counterfactual_mean(null.dgp, r, 2)) <= 4 * se);
  }

  TEST_CASE("effect-modifier blip at each quadrature node") {
    const EffectModifierParams p;
    const BlipTable t = excursion_blip(effect_modifier_dgp(p), effect_modifier_protocol(p), spec_at(2, 1, Summary::covariate(2)));
    CHECK(t.entries.size() == static_cast<std::size_t>(p.quadrature_nodes));
    for (const auto& entry : t.entries) {
      CHECK(std::abs(entry.blip - secondary_excursion_beta(entry.value[0], p)) < 1e-9);
    }
  }

  TEST_CASE("HR-MSM surface") {
    const TwoStepParams p{0.5};
    const HrMsmSurface s = hr_msm_surface(two_step_dgp(p), two_step_protocol(p), 1, 1, Summary::empty());
    REQUIRE(s.cells.size() == 4);
    CHECK(std::abs(s.mean({}, {0, 0}) - 0.25) < 1e-12);
    CHECK(std::abs(s.mean({}, {0, 1}) - std::exp(-1.0) / 4) < 1e-12);
    CHECK(std::abs(s.mean({}, {1, 0}) - 0.25) < 1e-12);
    CHECK(std::abs(s.mean({}, {1, 1}) - e / 4) < 1e-12);
    CHECK(std::abs(s.contrast({}, {1, 1}) - 1.0) < 1e-12);
    CHECK(std::abs(s.contrast({}, {0, 1}) + 1.0) < 1e-12);
    CHECK(s.contrast({}, {0, 0}) == 0.0);
    // Index 2 of the battery: null outcomes, everyone available, T = 3.
    REQUIRE(battery_dgp_options(2).null_effect);
    REQUIRE_FALSE(battery_dgp_options(2).random_availability);
    const TabularModel null = make_tabular_model(battery_dgp(1, 2));
    const HrMsmSurface n = hr_msm_surface(null.dgp, *null.protocol, 0, 2, Summary::covariate(0));
    CHECK(n.cells.size() == 16);
    for (const auto& c : n.cells) CHECK(std::abs(c.mean - n.mean(c.value, {0, 0, 0})) < 1e-12);
    const TabularModel avail = load_tabular_model_file(testing::config_path("null.dgp"));
    CHECK_THROWS_AS(hr_msm_surface(avail.dgp, *avail.protocol, 0, 1, Summary::empty()), IdentificationError);
    CHECK_THROWS_AS(hr_msm_surface(two_step_dgp(p), two_step_protocol(p), 0, 21, Summary::empty()), EnumerationLimitError);
    CHECK_THROWS_AS(hr_msm_surface(two_step_dgp(p), two_step_protocol(p), 1, 2, Summary::empty()), RangeError);
  }

  TEST_CASE("errors") {
    const TabularModel zero = make_tabular_model(parse_tabular_spec(std::string(
        "horizon = 0\n[outcome 0]\nhistory = A0=1; prob = 0.5\nhistory = *; prob = 0\n[protocol 0]\nhistory = *; prob = 0.5\n")));
    try {
      excursion_blip(zero.dgp, *zero.protocol, spec_at(0, 1));
      FAIL("expected an undefined blip");
    } catch (const UndefinedBlipError& err) {
      CHECK(std::string(err.what()).find("none") != std::string::npos);
    }
    const TwoStepParams p{0.5};
    const Dgp two = two_step_dgp(p);
    Condition c;
    c.time = 2;
    c.summary = Summary::treatment(1);
    c.value = {5};
    CHECK_THROWS_AS(counterfactual_mean(two, Regime::constant(0, 0), 2, c), ValidationError);
    OracleOptions tiny;
    tiny.node_limit = 1;
    CHECK_THROWS_AS(counterfactual_mean(two, Regime::constant(0, 0), 2, std::nullopt, tiny), EnumerationLimitError);
    Dgp::Laws laws;
    laws.covariate = [](const Trajectory&, int) -> CovariateLaw { return SampledLaw{[](CounterStream& r) { return r.uniform(); }}; };
    laws.availability = [](const Trajectory&, int) { return 1.0; };
    laws.outcome = [](const Trajectory&, int) { return 0.5; };
    const Dgp sampled("sampled", 1, laws);
    CHECK_THROWS_AS(counterfactual_mean(sampled, Regime::constant(0, 0), 1), NotEnumerableError);
    CHECK_THROWS_AS(excursion_blip(two, two_step_protocol(p), spec_at(2, 2)), RangeError);
    CHECK_THROWS_AS(excursion_blip(two, two_step_protocol(p), spec_at(0, 1)), ValidationError);
    CHECK_THROWS_AS(Summary::treatment(2)(history_at(testing::path_with({0, 1, 0}), 2)), RangeError);
  }

  TEST_CASE("blip csv") {
    const TwoStepParams p{0.5};
    const std::vector<BlipTable> tables{excursion_blip(two_step_dgp(p), two_step_protocol(p), spec_at(2, 1, Summary::treatment(1)))};
    std::ostringstream out;
    write_blip_csv(out, tables);
    CHECK(out.str() == "contrast,t,delta,summary_value,value\nblip-to-zero,2,1,A1=0,-1\nblip-to-zero,2,1,A1=1,1\n");
  }
}
