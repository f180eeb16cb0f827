#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "excursion/trajectory.hpp"

namespace excursion {

/// Features z(H_t) of the logistic propensity model.
struct FeatureMap {
  std::vector<std::string> names;
  std::function<std::vector<double>(const History&)> fn;

  static FeatureMap intercept();
  /// (1, A_{t-1})
  static FeatureMap intercept_previous_treatment();
  /// (1, X_t)
  static FeatureMap intercept_covariate();
  /// "intercept", "prev-treatment", "covariate"
  static FeatureMap parse(const std::string& name);

  Eigen::VectorXd operator()(const History& history) const;
};

struct PropensityFitDiagnostics {
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;  ///< max-norm of the mean score
  int rows = 0;
  int treated = 0;
};

/// Per-time logistic models for P(A_t = 1 | H_t, I*_t = 1).
class PropensityModel {
 public:
  PropensityModel(FeatureMap features, std::map<int, Eigen::VectorXd> coefficients,
                  std::map<int, PropensityFitDiagnostics> diagnostics);

  const FeatureMap& features() const noexcept { return features_; }
  const std::map<int, Eigen::VectorXd>& coefficients() const noexcept { return coefficients_; }
  const std::map<int, PropensityFitDiagnostics>& diagnostics() const noexcept { return diagnostics_; }
  bool converged() const;

  bool has_time(int t) const { return coefficients_.count(t) > 0; }
  /// Fitted p_t(H_t); NoDataError when no model exists for t.
  double predict(const History& history) const;

 private:
  FeatureMap features_;
  std::map<int, Eigen::VectorXd> coefficients_;
  std::map<int, PropensityFitDiagnostics> diagnostics_;
};

/// Maximum-likelihood logistic fit per time t over subjects with I*_t = 1, by
/// damped Newton; stops when the mean-score max-norm <= 1e-10 or after 100
/// iterations (then flagged in diagnostics). Times with no available subjects
/// are skipped. Throws SeparationError when a fitted stratum is all treated,
/// all untreated, or perfectly separated by the features.
PropensityModel fit_propensities(const Dataset& dataset, const FeatureMap& features);

}  // namespace excursion
