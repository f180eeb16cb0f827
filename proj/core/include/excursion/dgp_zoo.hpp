#pragma once

#include "excursion/dgp.hpp"
#include "excursion/protocol.hpp"

namespace excursion {

/// Mean of every untreated-at-the-last-step cell in the two-step examples.
inline constexpr double kBaselineMean = 0.25;

struct TwoStepParams {
  double theta = 0.5;  ///< P(A_1 = 1) = P(A_2 = 1)
  void validate() const;
};

struct EffectModifierParams {
  double theta = 0.5;
  double alpha0 = 2.666;
  double alpha1 = -0.905;
  int quadrature_nodes = 64;
  void validate() const;
};

/// Two treatments A_1, A_2 (T = 2, A_0 unavailable), no covariates, and
/// Y_2 ~ Bernoulli{exp(-a_2 + 2 a_1 a_2) / 4}. Y_0 = Y_1 = 0.
Dgp two_step_dgp(const TwoStepParams& params);
/// p_t ≡ theta.
Protocol two_step_protocol(const TwoStepParams& params);
double two_step_outcome_probability(int a1, int a2);

/// log{(1 - θ)/e + θ e}: the marginal excursion effect of A_2 on Y_2.
double two_step_closed_form_beta(double theta);
/// -1 + 2 a_1: the same contrast conditional on A_1.
double two_step_conditional_blip(int a1);

/// Two-step structure with a standard normal modifier X_2 drawn before A_2:
/// E{Y_2(a_1, 0) | X_2} = 1/4, E{Y_2(0, 1) | X_2} = expit(X_2 - α_0),
/// E{Y_2(1, 1) | X_2} = expit(-α_1 - X_2).
Dgp effect_modifier_dgp(const EffectModifierParams& params);
Protocol effect_modifier_protocol(const EffectModifierParams& params);
double effect_modifier_outcome_probability(int a1, int a2, double x2, const EffectModifierParams& params);

/// β(x_2) = log{θ/(1 + e^{α_1 + x_2}) + (1 - θ)/(1 + e^{α_0 - x_2})} - log(1/4).
double secondary_excursion_beta(double x2, const EffectModifierParams& params);

/// Central-difference slope of secondary_excursion_beta at x2.
double secondary_excursion_slope(double x2, const EffectModifierParams& params, double step = 1e-5);

}  // namespace excursion
