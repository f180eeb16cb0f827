#include "excursion/propensity.hpp"

#include <cmath>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"

namespace excursion {

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_likelihood(const Eigen::MatrixXd& z, const Eigen::VectorXd& a, const Eigen::VectorXd& gamma) {
  const Eigen::VectorXd eta = z * gamma;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log(1 + e^eta) computed stably
    const double softplus = eta[i] > 0 ? eta[i] + std::log1p(std::exp(-eta[i])) : std::log1p(std::exp(eta[i]));
    ll += a[i] * eta[i] - softplus;
  }
  return ll;
}

}  // namespace

FeatureMap FeatureMap::intercept() {
  return {{"intercept"}, [](const History&) { return std::vector<double>{1.0}; }};
}

FeatureMap FeatureMap::intercept_previous_treatment() {
  return {{"intercept", "prev_treatment"},
          [](const History& h) { return std::vector<double>{1.0, static_cast<double>(h.last_treatment())}; }};
}

FeatureMap FeatureMap::intercept_covariate() {
  return {{"intercept", "covariate"}, [](const History& h) { return std::vector<double>{1.0, h.covariates.back()}; }};
}

FeatureMap FeatureMap::parse(const std::string& name) {
  if (name == "intercept") return intercept();
  if (name == "prev-treatment") return intercept_previous_treatment();
  if (name == "covariate") return intercept_covariate();
  throw ParseError("unknown propensity features '" + name + "' (intercept, prev-treatment, covariate)");
}

Eigen::VectorXd FeatureMap::operator()(const History& history) const {
  const auto v = fn(history);
  if (v.size() != names.size()) throw ValidationError("feature map returned the wrong number of features");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

PropensityModel::PropensityModel(FeatureMap features, std::map<int, Eigen::VectorXd> coefficients,
                                 std::map<int, PropensityFitDiagnostics> diagnostics)
    : features_(std::move(features)), coefficients_(std::move(coefficients)), diagnostics_(std::move(diagnostics)) {}

bool PropensityModel::converged() const {
  for (const auto& [t, d] : diagnostics_) {
    if (!d.converged) return false;
  }
  return true;
}

double PropensityModel::predict(const History& history) const {
  auto it = coefficients_.find(history.time);
  if (it == coefficients_.end()) {
    throw NoDataError("no propensity model for t=" + std::to_string(history.time) + " (no available subjects)");
  }
  return expit(features_(history).dot(it->second));
}

PropensityModel fit_propensities(const Dataset& dataset, const FeatureMap& features) {
  std::map<int, Eigen::VectorXd> coefficients;
  std::map<int, PropensityFitDiagnostics> diagnostics;
  const auto p = static_cast<Eigen::Index>(features.names.size());
  for (int t = 0; t <= dataset.horizon; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dataset.subjects.size(); ++i) {
      if (dataset.subjects[i].availability[ti] == 1) rows.push_back(i);
    }
    if (rows.empty()) continue;
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd z(n, p);
    Eigen::VectorXd a(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Trajectory& path = dataset.subjects[rows[static_cast<std::size_t>(r)]];
      z.row(r) = features(history_at(path, t)).transpose();
      a[r] = path.treatments[ti];
    }
    PropensityFitDiagnostics diag;
    diag.rows = static_cast<int>(n);
    diag.treated = static_cast<int>(a.sum());
    const std::string at = "propensity at t=" + std::to_string(t);
    if (diag.treated == 0 || diag.treated == n) {
      throw SeparationError(at + ": all " + std::to_string(n) + " available subjects are " +
                            (diag.treated == 0 ? "untreated" : "treated"));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
    if (qr.rank() < p) throw RankDeficiencyError(at + ": feature matrix has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p));

    const double mean_a = a.mean();
    // Start from the least-squares fit of the marginal log-odds.
    Eigen::VectorXd gamma = qr.solve(Eigen::VectorXd::Constant(n, std::log(mean_a / (1.0 - mean_a))));
    double ll = log_likelihood(z, a, gamma);
    for (diag.iterations = 0; diag.iterations < 100; ++diag.iterations) {
      const Eigen::VectorXd prob = (z * gamma).unaryExpr([](double e) { return expit(e); });
      const Eigen::VectorXd score = z.transpose() * (a - prob);
      diag.gradient_norm = score.lpNorm<Eigen::Infinity>() / static_cast<double>(n);
      if (diag.gradient_norm <= 1e-10) {
        diag.converged = true;
        break;
      }
      const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
      const Eigen::MatrixXd info = z.transpose() * w.asDiagonal() * z;
      const Eigen::VectorXd step = info.ldlt().solve(score);
      double scale = 1.0;
      bool improved = false;
      for (int half = 0; half < 40; ++half, scale *= 0.5) {
        const Eigen::VectorXd trial = gamma + scale * step;
        const double trial_ll = log_likelihood(z, a, trial);
        if (std::isfinite(trial_ll) && trial_ll >= ll - 1e-12 * std::abs(ll)) {
          gamma = trial;
          ll = trial_ll;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
    // A diverging fit whose likelihood tends to 1 is monotone: the features separate the classes.
    if (gamma.lpNorm<Eigen::Infinity>() > 30.0 || (!diag.converged && ll > -1e-6 * static_cast<double>(n))) {
      throw SeparationError(at + ": treatment is (quasi-)perfectly separated by the features; the likelihood is monotone");
    }
    coefficients[t] = gamma;
    diagnostics[t] = diag;
  }
  if (coefficients.empty()) throw NoDataError("no available subject-times to fit propensities on");
  return PropensityModel(features, std::move(coefficients), std::move(diagnostics));
}

}  // namespace excursion
