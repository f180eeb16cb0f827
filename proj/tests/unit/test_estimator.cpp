#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "excursion/dgp_zoo.hpp"
#include "excursion/errors.hpp"
#include "excursion/estimator.hpp"
#include "excursion/simulate.hpp"
#include "excursion/tabular.hpp"
#include "helpers.hpp"

using namespace excursion;

namespace {

constexpr double kBetaHalf = 0.4337808304830272;

std::shared_ptr<const Dataset> two_step_data(double theta, std::int64_t n, std::uint64_t seed) {
  const TwoStepParams p{theta};
  return std::make_shared<const Dataset>(
      simulate_sre(two_step_dgp(p), two_step_protocol(p), EligibilitySpec::all_eligible(), n, seed));
}

EstimationResult fit_two_step(const std::shared_ptr<const Dataset>& d, double theta, PropensityMode mode,
                              const Summary& s = Summary::empty()) {
  const Protocol proto = two_step_protocol({theta});
  EmulationOptions o;
  o.mode = mode;
  o.enrollment_time = 2;
  return emulate_series(d, EligibilitySpec::all_eligible(), 1, s, &proto, o);
}

std::shared_ptr<const Dataset> hand_dataset(const std::vector<std::vector<int>>& treatments) {
  auto d = std::make_shared<Dataset>();
  d->horizon = static_cast<int>(treatments.front().size()) - 1;
  for (const auto& a : treatments) d->subjects.push_back(testing::path_with(a));
  return d;
}

}  // namespace

TEST_SUITE("person_trials") {
  TEST_CASE("series of trials") {
    const auto d = hand_dataset({{0, 1, 0, 1}, {1, 0, 0, 0}, {0, 0, 0, 0}});
    const PersonTrialTable all = stack_person_trials(d, EligibilitySpec::all_eligible(), 1);
    CHECK(all.rows.size() == 12);
    for (int t = 0; t <= 3; ++t) CHECK(all.trial_counts.at(t) == 3);
    const PersonTrialTable two = stack_person_trials(d, EligibilitySpec::all_eligible(), 2);
    CHECK(two.rows.size() == 9);
    const PersonTrialTable ex = stack_person_trials(d, EligibilitySpec::exclude_recently_treated(), 1);
    // Subject 0 is treated at 1 and 3, subject 1 at 0: rows (0,2) and (1,1) go.
    CHECK(ex.rows.size() == 10);
    for (const auto& row : ex.rows) {
      if (row.t > 0) CHECK(d->subjects[static_cast<std::size_t>(row.subject)].treatments[static_cast<std::size_t>(row.t - 1)] == 0);
    }
    StackOptions keep;
    keep.keep_ineligible = true;
    CHECK(stack_person_trials(d, EligibilitySpec::exclude_recently_treated(), 1, Summary::empty(), keep).rows.size() == 12);
    CHECK_THROWS_AS(stack_person_trials(d, EligibilitySpec::all_eligible(), 5), RangeError);
    CHECK_THROWS_AS(stack_person_trials(d, EligibilitySpec::all_eligible(), 0), RangeError);
    StackOptions late;
    late.enrollment_time = 3;
    CHECK_THROWS_AS(stack_person_trials(d, EligibilitySpec::all_eligible(), 2, Summary::empty(), late), RangeError);
    late.enrollment_time = 2;
    CHECK(stack_person_trials(d, EligibilitySpec::all_eligible(), 2, Summary::empty(), late).rows.size() == 3);
  }

  TEST_CASE("outcome is read at the end of the excursion") {
    auto d = std::make_shared<Dataset>();
    d->horizon = 2;
    Trajectory p = testing::path_with({0, 0, 0});
    p.outcomes = {0, 1, 0};
    d->subjects.push_back(p);
    const PersonTrialTable t = stack_person_trials(d, EligibilitySpec::all_eligible(), 2);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].y == 1);
    CHECK(t.rows[1].y == 0);
  }

  TEST_CASE("weights") {
    const auto d = hand_dataset({{0, 0, 0}, {0, 1, 0}, {1, 0, 1}});
    const Protocol proto(2, [](const History& h) { return h.time == 0 ? 0.5 : 0.3; }, "p");
    const PersonTrialTable one = compute_weights(stack_person_trials(d, EligibilitySpec::all_eligible(), 1), proto);
    for (const auto& r : one.rows) CHECK(r.j_weight == 1.0);
    const PersonTrialTable two = compute_weights(stack_person_trials(d, EligibilitySpec::all_eligible(), 2), proto);
    // Row (subject 0, t=0): A_0 = 0 with p = 0.5, then A_1 = 0 with p_1 = 0.3.
    CHECK(two.rows[0].ipw == doctest::Approx(2.0));
    CHECK(std::abs(two.rows[0].j_weight - 1.0 / 0.7) < 1e-15);
    CHECK(std::abs(two.rows[0].j_weight - 1.428571) < 1e-6);
    // Row (subject 1, t=0): A_1 = 1, so J = 0.
    CHECK(two.rows[2].j_weight == 0.0);
    CHECK(two.rows[2].weight == 0.0);
    // Row (subject 2, t=0): A_0 = 1.
    CHECK(std::abs(two.rows[4].ipw - 2.0) < 1e-15);
    CHECK(two.weight_source == "known");

    auto unavailable = std::make_shared<Dataset>(*d);
    unavailable->subjects[0].availability[1] = 0;
    const PersonTrialTable skip = compute_weights(stack_person_trials(unavailable, EligibilitySpec::all_eligible(), 2), proto);
    CHECK(skip.rows[0].j_weight == 1.0);

    const Protocol certain(2, [](const History&) { return 1.0; }, "always");
    try {
      compute_weights(stack_person_trials(d, EligibilitySpec::all_eligible(), 1), certain);
      FAIL("expected a positivity error");
    } catch (const PositivityError& err) {
      CHECK(std::string(err.what()).find("subject 0, t=0") != std::string::npos);
    }
    WeightOptions clip;
    clip.truncation = 0.05;
    const PersonTrialTable clipped = compute_weights(stack_person_trials(d, EligibilitySpec::all_eligible(), 1), certain, clip);
    CHECK(clipped.rows[0].ipw == doctest::Approx(20.0));
    CHECK(clipped.truncation == 0.05);
    clip.truncation = 0.6;
    CHECK_THROWS_AS(compute_weights(stack_person_trials(d, EligibilitySpec::all_eligible(), 1), certain, clip), ValidationError);
  }

  TEST_CASE("person-trial csv") {
    const auto d = hand_dataset({{0, 1}});
    const PersonTrialTable t = compute_weights(stack_person_trials(d, EligibilitySpec::all_eligible(), 1, Summary::treatment(0),
                                                                   StackOptions{false, 1}),
                                               Protocol::constant(1, 0.25));
    std::ostringstream out;
    write_person_trial_csv(out, t);
    CHECK(out.str() == "subject,t,eligible,a_t,y,weight,j_weight,A0\n0,1,1,1,0,4,1,0\n");
  }
}

TEST_SUITE("propensity") {
  TEST_CASE("intercept-only fit is the sample fraction") {
    std::vector<std::vector<int>> a(100, {0});
    for (int i = 0; i < 37; ++i) a[static_cast<std::size_t>(i)] = {1};
    const auto d = hand_dataset(a);
    const PropensityModel m = fit_propensities(*d, FeatureMap::intercept());
    CHECK(std::abs(m.predict(history_at(d->subjects[0], 0)) - 0.37) < 1e-9);
    CHECK(m.converged());
    CHECK_THROWS_AS(m.predict(history_at(d->subjects[0], 1)), NoDataError);
  }

  TEST_CASE("fitted intercept under a fair coin") {
    const auto d = two_step_data(0.5, 10000, 8);
    const PropensityModel m = fit_propensities(*d, FeatureMap::intercept());
    CHECK_FALSE(m.has_time(0));
    const double se = 1.0 / std::sqrt(10000 * 0.25);
    for (int t : {1, 2}) CHECK(std::abs(m.coefficients().at(t)[0]) <= 3 * se);
  }

  TEST_CASE("separation and degenerate data") {
    CHECK_THROWS_AS(fit_propensities(*hand_dataset({{1}, {1}, {1}}), FeatureMap::intercept()), SeparationError);
    auto d = std::make_shared<Dataset>(*hand_dataset({{1}, {1}, {0}, {0}}));
    d->subjects[0].covariates[0] = d->subjects[1].covariates[0] = 1;
    CHECK_THROWS_AS(fit_propensities(*d, FeatureMap::intercept_covariate()), SeparationError);
    auto flat = std::make_shared<Dataset>(*hand_dataset({{1}, {0}, {1}, {0}}));
    CHECK_THROWS_AS(fit_propensities(*flat, FeatureMap::intercept_covariate()), RankDeficiencyError);
    auto none = std::make_shared<Dataset>(*hand_dataset({{0}, {0}}));
    for (auto& s : none->subjects) s.availability[0] = s.eligibility[0] = 0;
    CHECK_THROWS_AS(fit_propensities(*none, FeatureMap::intercept()), NoDataError);
    CHECK_THROWS_AS(FeatureMap::parse("quadratic"), ParseError);
  }
}

TEST_SUITE("estimator") {
  TEST_CASE("marginal excursion effect at theta = 0.5") {
    const auto d = two_step_data(0.5, 20000, 1);
    for (auto mode : {PropensityMode::known, PropensityMode::estimated}) {
      const EstimationResult r = fit_two_step(d, 0.5, mode);
      CHECK(std::abs(r.beta_hat[0] - kBetaHalf) <= 3 * r.beta_se(0));
      CHECK(r.beta_se(0) <= 0.05);
      CHECK(r.max_abs_score <= 1e-8);
      CHECK(r.n_person_trials == 20000);
      CHECK(r.propensity_mode == to_string(mode));
      CHECK((r.covariance - r.covariance.transpose()).norm() == 0.0);
      CHECK(r.covariance.selfadjointView<Eigen::Lower>().ldlt().vectorD().minCoeff() >= 0.0);
    }
  }

  TEST_CASE("conditional on the previous treatment") {
    const auto d = two_step_data(0.5, 20000, 2);
    const EstimationResult r = fit_two_step(d, 0.5, PropensityMode::known, Summary::treatment(1));
    REQUIRE(r.beta_hat.size() == 2);
    CHECK(std::abs(r.beta_hat[0] + 1.0) <= 3 * r.beta_se(0));
    CHECK(std::abs(r.beta_hat[1] - 2.0) <= 3 * r.beta_se(1));
    CHECK(r.beta_names == std::vector<std::string>{"beta:intercept", "beta:A1"});
  }

  TEST_CASE("null DGP pooled over trials") {
    const TabularModel m = load_tabular_model_file(testing::config_path("null.dgp"));
    const auto d = std::make_shared<const Dataset>(simulate_sre(m.dgp, *m.protocol, EligibilitySpec::all_eligible(), 20000, 4));
    for (auto mode : {PropensityMode::known, PropensityMode::estimated}) {
      EmulationOptions o;
      o.mode = mode;
      o.propensity_features = FeatureMap::intercept_covariate();
      const EstimationResult r = emulate_series(d, EligibilitySpec::all_eligible(), 1, Summary::empty(), &*m.protocol, o);
      CHECK(std::abs(r.beta_hat[0]) <= 3 * r.beta_se(0));
      CHECK(r.n_person_trials > 20000);
    }
  }

  TEST_CASE("subject order does not matter") {
    const auto d = two_step_data(0.5, 3000, 5);
    auto shuffled = std::make_shared<Dataset>(*d);
    std::reverse(shuffled->subjects.begin(), shuffled->subjects.end());
    std::rotate(shuffled->subjects.begin(), shuffled->subjects.begin() + 1234, shuffled->subjects.end());
    for (auto mode : {PropensityMode::known, PropensityMode::estimated}) {
      const EstimationResult a = fit_two_step(d, 0.5, mode, Summary::treatment(1));
      const EstimationResult b = fit_two_step(shuffled, 0.5, mode, Summary::treatment(1));
      CHECK((a.beta_hat - b.beta_hat).lpNorm<Eigen::Infinity>() <= 1e-12);
      CHECK((a.std_errors - b.std_errors).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }

  TEST_CASE("estimates follow the sign of the closed form") {
    std::vector<double> b;
    for (double theta : {0.1, 0.5, 0.9}) b.push_back(fit_two_step(two_step_data(theta, 20000, 6), theta, PropensityMode::known).beta_hat[0]);
    CHECK(b[0] < 0);
    CHECK(b[1] > 0);
    CHECK(b[2] > 0);
    CHECK(b[0] < b[1]);
    CHECK(b[1] < b[2]);
  }

  TEST_CASE("excursion of length two") {
    const auto d = two_step_data(0.5, 20000, 7);
    const Protocol proto = two_step_protocol({0.5});
    EmulationOptions o;
    o.enrollment_time = 1;
    const EstimationResult r = emulate_series(d, EligibilitySpec::all_eligible(), 2, Summary::empty(), &proto, o);
    // a_1 = 1 then a_2 = 0 against a_1 = 0 then a_2 = 0: both means are 1/4.
    CHECK(std::abs(r.beta_hat[0]) <= 3 * r.beta_se(0));
  }

  TEST_CASE("estimated-propensity variance tracks the sampling spread") {
    // Covariate-dependent assignment with an intercept-only blip, so the
    // estimated propensities move the estimate and their variance matters.
    const TabularModel m = load_tabular_model_file(testing::config_path("null.dgp"));
    std::vector<double> hats, ses;
    for (int rep = 0; rep < 60; ++rep) {
      const auto d = std::make_shared<const Dataset>(
          simulate_sre(m.dgp, *m.protocol, EligibilitySpec::all_eligible(), 2000, derive_seed(99, static_cast<std::uint64_t>(rep))));
      EmulationOptions o;
      o.mode = PropensityMode::estimated;
      o.propensity_features = FeatureMap::intercept_covariate();
      o.enrollment_time = 0;
      const EstimationResult r = emulate_series(d, EligibilitySpec::all_eligible(), 3, Summary::empty(), nullptr, o);
      hats.push_back(r.beta_hat[0]);
      ses.push_back(r.beta_se(0));
    }
    double mean = 0, sd = 0, se = 0;
    for (double h : hats) mean += h / hats.size();
    for (double h : hats) sd += (h - mean) * (h - mean) / (hats.size() - 1);
    for (double s : ses) se += s / ses.size();
    sd = std::sqrt(sd);
    CHECK(se / sd > 0.75);
    CHECK(se / sd < 1.33);
  }

  TEST_CASE("errors") {
    auto none = std::make_shared<Dataset>(*hand_dataset({{0, 0}, {0, 0}}));
    for (auto& s : none->subjects) s.availability = s.eligibility = {0, 0};
    CHECK_THROWS_AS(emulate_series(none, EligibilitySpec::all_eligible(), 1, Summary::empty(), nullptr,
                                   EmulationOptions{PropensityMode::estimated}),
                    NoDataError);
    const Protocol proto = Protocol::constant(1, 0.5);
    CHECK_THROWS_AS(emulate_series(none, EligibilitySpec::all_eligible(), 1, Summary::empty(), &proto), NoDataError);
    const auto d = two_step_data(0.5, 100, 1);
    CHECK_THROWS_AS(emulate_series(d, EligibilitySpec::all_eligible(), 1, Summary::empty(), nullptr), UsageError);
    CHECK_THROWS_AS(parse_propensity_mode("guess"), ParseError);
  }

  TEST_CASE("estimation csv") {
    const EstimationResult r = fit_two_step(two_step_data(0.5, 2000, 3), 0.5, PropensityMode::known);
    std::ostringstream out;
    write_estimation_csv(out, r);
    const std::string s = out.str();
    CHECK(s.rfind("name,estimate,se\nalpha:intercept,", 0) == 0);
    CHECK(s.find("\nbeta:intercept,") != std::string::npos);
    CHECK(s.find("\n# person_trials=2000\n") != std::string::npos);
  }
}
