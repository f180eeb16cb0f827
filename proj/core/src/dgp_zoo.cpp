#include "excursion/dgp_zoo.hpp"

#include <cmath>
#include <numbers>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"

namespace excursion {

namespace {

constexpr int kTwoStepHorizon = 2;

void check_theta(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw RangeError("theta " + format_number(theta) + " outside [0,1]");
}

void check_binary(int a, const char* what) {
  if (a != 0 && a != 1) throw RangeError(std::string(what) + " must be 0 or 1");
}

// A_0 is structurally unavailable so that A_1, A_2 keep their usual labels.
double two_step_availability(const Trajectory&, int t) { return t == 0 ? 0.0 : 1.0; }

}  // namespace

void TwoStepParams::validate() const { check_theta(theta); }

void EffectModifierParams::validate() const {
  check_theta(theta);
  if (!std::isfinite(alpha0) || !std::isfinite(alpha1)) throw ValidationError("alpha parameters must be finite");
  if (quadrature_nodes < 1) throw ValidationError("quadrature_nodes must be >= 1");
}

double two_step_outcome_probability(int a1, int a2) {
  check_binary(a1, "a1");
  check_binary(a2, "a2");
  return std::exp(-a2 + 2.0 * a1 * a2) * kBaselineMean;
}

Dgp two_step_dgp(const TwoStepParams& params) {
  params.validate();
  Dgp::Laws laws;
  laws.covariate = [](const Trajectory&, int) -> CovariateLaw { return point_mass(0.0); };
  laws.availability = two_step_availability;
  laws.outcome = [](const Trajectory& path, int t) {
    if (t != 2) return 0.0;
    return two_step_outcome_probability(path.treatments[1], path.treatments[2]);
  };
  return Dgp("two-step", kTwoStepHorizon, std::move(laws));
}

Protocol two_step_protocol(const TwoStepParams& params) {
  params.validate();
  return Protocol::constant(kTwoStepHorizon, params.theta);
}

double two_step_closed_form_beta(double theta) {
  check_theta(theta);
  return std::log((1.0 - theta) / std::numbers::e + theta * std::numbers::e);
}

double two_step_conditional_blip(int a1) {
  check_binary(a1, "a1");
  return -1.0 + 2.0 * a1;
}

double effect_modifier_outcome_probability(int a1, int a2, double x2, const EffectModifierParams& params) {
  check_binary(a1, "a1");
  check_binary(a2, "a2");
  if (a2 == 0) return kBaselineMean;
  return a1 == 1 ? 1.0 / (1.0 + std::exp(params.alpha1 + x2)) : 1.0 / (1.0 + std::exp(params.alpha0 - x2));
}

Dgp effect_modifier_dgp(const EffectModifierParams& params) {
  params.validate();
  Dgp::Laws laws;
  laws.covariate = [](const Trajectory&, int t) -> CovariateLaw {
    if (t == 2) return GaussianLaw{0.0, 1.0};
    return point_mass(0.0);
  };
  laws.availability = two_step_availability;
  laws.outcome = [params](const Trajectory& path, int t) {
    if (t != 2) return 0.0;
    return effect_modifier_outcome_probability(path.treatments[1], path.treatments[2], path.covariates[2], params);
  };
  return Dgp("effect-modifier", kTwoStepHorizon, std::move(laws), false, params.quadrature_nodes);
}

Protocol effect_modifier_protocol(const EffectModifierParams& params) {
  params.validate();
  return Protocol::constant(kTwoStepHorizon, params.theta);
}

double secondary_excursion_beta(double x2, const EffectModifierParams& params) {
  params.validate();
  const double treated_before = params.theta / (1.0 + std::exp(params.alpha1 + x2));
  const double untreated_before = (1.0 - params.theta) / (1.0 + std::exp(params.alpha0 - x2));
  return std::log(treated_before + untreated_before) - std::log(kBaselineMean);
}

double secondary_excursion_slope(double x2, const EffectModifierParams& params, double step) {
  return (secondary_excursion_beta(x2 + step, params) - secondary_excursion_beta(x2 - step, params)) / (2.0 * step);
}

}  // namespace excursion
