#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "excursion/person_trial.hpp"
#include "excursion/propensity.hpp"

namespace excursion {

/// Log-link excursion model E{Y_{t,Δ} | A_t, S_t} = exp{g(t,S_t)ᵀα + A_t f(t,S_t)ᵀβ}
/// in the weighted pseudo-population.
struct ExcursionModel {
  using Design = std::function<std::vector<double>(const PersonTrialRow&)>;

  std::vector<std::string> blip_names;
  Design blip_design;  ///< f
  std::vector<std::string> nuisance_names;
  Design nuisance_design;  ///< g
  /// Restrict to the trial enrolling at this t; all trials pooled otherwise.
  std::optional<int> enrollment_time;

  /// f = g = (1, S_t) using the table's summary features.
  static ExcursionModel linear_in_summary(const PersonTrialTable& table, std::optional<int> enrollment_time);
};

struct FitOptions {
  int max_iterations = 100;
  double score_tolerance = 1e-12;  ///< max-norm of the mean score
};

struct EstimationResult {
  std::vector<std::string> alpha_names;
  std::vector<std::string> beta_names;
  Eigen::VectorXd alpha_hat;
  Eigen::VectorXd beta_hat;
  Eigen::MatrixXd covariance;  ///< over (α, β), subject-clustered sandwich
  Eigen::VectorXd std_errors;  ///< sqrt(diag(covariance))
  int n_person_trials = 0;
  int n_subjects = 0;
  int iterations = 0;
  double max_abs_score = 0.0;  ///< max-norm of the mean weighted score at the solution
  std::string propensity_mode;
  std::optional<double> truncation;

  double beta_se(std::size_t i) const;
  double alpha_se(std::size_t i) const;
  std::string diagnostics() const;
};

/// Solves the weighted estimating equation
///   sum_i sum_{rows r of i} w_r (Y_r - exp(x_rᵀθ)) x_r = 0,  x_r = (g_r, A_r f_r),
/// by damped Newton from α = unweighted log-linear fit, β = 0. Variance is the
/// sandwich clustered on subject; with estimated propensities the propensity
/// scores are stacked so their estimation is accounted for. Throws NoDataError,
/// RankDeficiencyError or ConvergenceError.
EstimationResult fit_excursion_model(const PersonTrialTable& table, const ExcursionModel& model,
                                     const FitOptions& options = {});

enum class PropensityMode { known, estimated };
const char* to_string(PropensityMode mode);
PropensityMode parse_propensity_mode(const std::string& text);

struct EmulationOptions {
  PropensityMode mode = PropensityMode::known;
  FeatureMap propensity_features = FeatureMap::intercept();
  WeightOptions weights;
  FitOptions fit;
  std::optional<int> enrollment_time;
};

/// stack -> (fit propensities) -> weights -> fit. `protocol` is required in
/// known mode and ignored in estimated mode.
EstimationResult emulate_series(std::shared_ptr<const Dataset> dataset, const EligibilitySpec& eligibility,
                                int delta, const Summary& summary, const Protocol* protocol,
                                const EmulationOptions& options = {});

/// `name,estimate,se` rows followed by a `#` diagnostics block.
void write_estimation_csv(std::ostream& out, const EstimationResult& result);

}  // namespace excursion
