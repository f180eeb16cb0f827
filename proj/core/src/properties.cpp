#include "excursion/properties.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"
#include "excursion/rng.hpp"

namespace excursion {

namespace {

bool has_eligible(const Dgp& dgp, const Protocol& protocol, int t, const OracleOptions& options) {
  const auto cells = counterfactual_cells(dgp, excursion_regime(protocol, t, std::vector<int>(1, 0)), t, t,
                                          Summary::empty(), true, options);
  return !cells.empty();
}

std::vector<Regime> regime_library(const Dgp& dgp, const Protocol& protocol, int k) {
  std::vector<Regime> out;
  const int length = k + 1;
  for (std::uint32_t code = 0; code < (1U << length); ++code) {
    std::vector<int> path(static_cast<std::size_t>(length));
    for (int j = 0; j < length; ++j) path[static_cast<std::size_t>(j)] = static_cast<int>((code >> j) & 1U);
    out.push_back(Regime::static_path(0, path));
  }
  out.push_back(Regime::carry_forward(0));
  out.push_back(Regime::dynamic(0, [](const History& h) { return h.covariates.back() > 0.0 ? 1 : 0; }, "treat-if-X>0"));
  out.push_back(Regime::dynamic(
      0, [](const History& h) { return !h.outcomes.empty() && h.outcomes.back() == 1 ? 1 : 0; },
      "treat-if-previous-Y"));
  out.push_back(Regime::random_policy(0, [](const History&) { return 0.5; }, "random-0.5"));
  if (protocol.horizon() == dgp.horizon()) out.push_back(Regime::from_protocol(protocol));
  return out;
}

// log(num/den) with 0/0 read as 0 (no effect on a null endpoint).
double safe_log_ratio(double num, double den) {
  if (num == 0.0 && den == 0.0) return 0.0;
  if (num == 0.0) return -std::numeric_limits<double>::infinity();
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return std::log(num / den);
}

}  // namespace

std::string NullPreservationReport::summary() const {
  return std::string("null-preservation: ") + (passed ? "PASS" : "FAIL") +
         " (max |blip| = " + format_number(max_abs_blip) + ", spread = " + format_number(spread) + ", " +
         std::to_string(regimes_checked) + " regimes checked, " + std::to_string(regimes_skipped) +
         " not identified, " + std::to_string(violations.size()) + " blip violations)";
}

NullPreservationReport check_null_preservation(const Dgp& dgp, const Protocol& protocol, int k, double tol,
                                               const OracleOptions& options) {
  if (k < 0 || k > dgp.horizon()) throw RangeError("endpoint k outside the horizon");
  if (k + 1 > 12) throw EnumerationLimitError("null-preservation regime library needs k <= 11");
  NullPreservationReport report;
  const Regime zero = Regime::constant(0, 0);
  const Summary h = Summary::full_history();
  for (int t = 0; t <= k; ++t) {
    if (!has_eligible(dgp, protocol, t, options)) continue;
    std::optional<Regime> follow;
    if (k > t) follow = zero;
    const auto num = counterfactual_cells(dgp, excursion_regime(protocol, t, {1}, follow), k, t, h, true, options);
    const auto den = counterfactual_cells(dgp, excursion_regime(protocol, t, {0}, follow), k, t, h, true, options);
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double blip = safe_log_ratio(num[i].mean, den[i].mean);
      report.max_abs_blip = std::max(report.max_abs_blip, std::abs(blip));
      if (!(std::abs(blip) <= tol)) report.violations.push_back({t, h.label(num[i].value), blip});
    }
  }
  report.blips_null = report.violations.empty();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& regime : regime_library(dgp, protocol, k)) {
    try {
      const double mean = counterfactual_mean(dgp, regime, k, std::nullopt, options);
      lo = std::min(lo, mean);
      hi = std::max(hi, mean);
      ++report.regimes_checked;
    } catch (const IdentificationError&) {
      ++report.regimes_skipped;
    }
  }
  report.spread = report.regimes_checked > 0 ? hi - lo : 0.0;
  report.passed = report.blips_null && report.spread <= tol;
  return report;
}

std::string WeightedAverageReport::summary() const {
  return std::string("weighted-average: ") + (passed ? "PASS" : "FAIL") + " (" + std::to_string(cells_checked) +
         " cells, max bracket violation = " + format_number(max_bracket_violation) +
         ", max identity error = " + format_number(max_identity_error) + ")";
}

WeightedAverageReport check_weighted_average(const Dgp& dgp, const Protocol& protocol, const Regime& g, int t, int k,
                                             const Summary& summary, double tol, const OracleOptions& options) {
  if (t < 0 || k < t || k > dgp.horizon()) throw RangeError("weighted-average check needs 0 <= t <= k <= T");
  std::optional<Regime> follow;
  if (k > t) follow = g;
  const Regime num_regime = excursion_regime(protocol, t, {1}, follow);
  const Regime den_regime = excursion_regime(protocol, t, {0}, follow);
  const Summary h = Summary::full_history();
  const auto num_h = counterfactual_cells(dgp, num_regime, k, t, h, true, options);
  const auto den_h = counterfactual_cells(dgp, den_regime, k, t, h, true, options);
  const auto num_s = counterfactual_cells(dgp, num_regime, k, t, summary, true, options);
  const auto den_s = counterfactual_cells(dgp, den_regime, k, t, summary, true, options);

  // Group history cells by their summary value.
  std::map<SummaryValue, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < num_h.size(); ++i) members[summary(num_h[i].representative)].push_back(i);

  WeightedAverageReport report;
  for (std::size_t j = 0; j < num_s.size(); ++j) {
    ++report.cells_checked;
    const std::string label = summary.label(num_s[j].value);
    if (!(den_s[j].mean > 0.0)) {
      report.passed = false;
      report.failures.push_back("cell " + label + ": zero denominator mean");
      continue;
    }
    const double coarse = num_s[j].mean / den_s[j].mean;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double weight_sum = 0.0;
    double weighted = 0.0;
    for (std::size_t i : members[num_s[j].value]) {
      const double w = (num_h[i].mass / num_s[j].mass) * den_h[i].mean;
      if (w <= 0.0) continue;
      const double fine = num_h[i].mean / den_h[i].mean;
      lo = std::min(lo, fine);
      hi = std::max(hi, fine);
      weight_sum += w;
      weighted += w * fine;
    }
    if (weight_sum <= 0.0) {
      report.passed = false;
      report.failures.push_back("cell " + label + ": no history with positive weight");
      continue;
    }
    const double bracket = std::max({0.0, lo - coarse, coarse - hi});
    const double identity = std::abs(coarse - weighted / weight_sum);
    report.max_bracket_violation = std::max(report.max_bracket_violation, bracket);
    report.max_identity_error = std::max(report.max_identity_error, identity);
    if (bracket > tol || identity > tol) {
      report.passed = false;
      report.failures.push_back("cell " + label + ": exp(gamma) = " + format_number(coarse) + " vs [" +
                                format_number(lo) + ", " + format_number(hi) + "], weighted mean " +
                                format_number(weighted / weight_sum));
    }
  }
  return report;
}

const char* to_string(ProbeStatus status) {
  switch (status) {
    case ProbeStatus::feasible: return "feasible";
    case ProbeStatus::infeasible: return "infeasible";
    case ProbeStatus::not_converged: return "not-converged";
  }
  return "?";
}

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Binary model with covariates X_0..X_K, actions A_0..A_K and the single
// outcome Y_K. Covariate law t is indexed by (X_0..X_{t-1}, A_0..A_{t-1});
// the outcome law by (X_0..X_K, A_0..A_K). Bits are packed with time 0 lowest.
class BinaryModel {
 public:
  explicit BinaryModel(int endpoint) : k_(endpoint) {
    offset_.push_back(0);
    for (int t = 0; t <= k_; ++t) offset_.push_back(offset_.back() + (std::size_t{1} << (2 * t)));
    y_offset_ = offset_.back();
    size_ = y_offset_ + (std::size_t{1} << (2 * (k_ + 1)));
  }

  std::size_t size() const { return size_; }
  int endpoint() const { return k_; }

  std::size_t covariate_index(int t, unsigned xs, unsigned as) const {
    return offset_[static_cast<std::size_t>(t)] + (xs | (static_cast<std::size_t>(as) << t));
  }
  std::size_t outcome_index(unsigned xs, unsigned as) const {
    return y_offset_ + (xs | (static_cast<std::size_t>(as) << (k_ + 1)));
  }

  /// E{Y_K(a_m..a_K) | X_0..X_m = xs, A_0..A_{m-1} = as}; `future` holds a_m..a_K.
  double mean(const Eigen::VectorXd& theta, int m, unsigned xs, unsigned as, const std::vector<int>& future) const {
    unsigned a_all = as;
    for (std::size_t j = 0; j < future.size(); ++j) a_all |= static_cast<unsigned>(future[j]) << (m + static_cast<int>(j));
    return integrate(theta, m + 1, xs, a_all);
  }

 private:
  double integrate(const Eigen::VectorXd& theta, int t, unsigned xs, unsigned a_all) const {
    if (t > k_) return expit(theta[static_cast<Eigen::Index>(outcome_index(xs, a_all))]);
    const unsigned past_a = a_all & ((1U << t) - 1U);
    const double p1 = expit(theta[static_cast<Eigen::Index>(covariate_index(t, xs, past_a))]);
    return (1.0 - p1) * integrate(theta, t + 1, xs, a_all) + p1 * integrate(theta, t + 1, xs | (1U << t), a_all);
  }

  int k_;
  std::vector<std::size_t> offset_;
  std::size_t y_offset_ = 0;
  std::size_t size_ = 0;
};

Eigen::VectorXd probe_residuals(const BinaryModel& model, const Eigen::VectorXd& theta,
                                std::span<const BlipTarget> targets) {
  std::vector<double> r;
  const int k = model.endpoint();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& target = targets[i];
    const int m = target.m;
    std::vector<int> one(static_cast<std::size_t>(k - m + 1), 0);
    std::vector<int> zero = one;
    one[0] = 1;
    for (unsigned xs = 0; xs < (1U << (m + 1)); ++xs) {
      for (unsigned as = 0; as < (1U << m); ++as) {
        const double mu1 = model.mean(theta, m, xs, as, one);
        const double mu0 = model.mean(theta, m, xs, as, zero);
        r.push_back(std::log(mu1) - std::log(mu0) - target.blip);
        if (target.baseline) r.push_back(mu0 - *target.baseline);
      }
    }
  }
  return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
}

TabularSpec to_spec(const BinaryModel& model, const Eigen::VectorXd& theta, int horizon) {
  using M = TabularSpec::Match;
  using V = TabularSpec::Variable;
  const int k = model.endpoint();
  TabularSpec spec;
  spec.horizon = horizon;
  for (int t = 0; t <= k; ++t) {
    spec.supports[t] = {0.0, 1.0};
    auto& section = spec.covariate[t];
    for (unsigned xs = 0; xs < (1U << t); ++xs) {
      for (unsigned as = 0; as < (1U << t); ++as) {
        TabularSpec::Row row;
        for (int s = 0; s < t; ++s) {
          row.pattern.push_back(M{V::covariate, s, double((xs >> s) & 1U)});
          row.pattern.push_back(M{V::treatment, s, double((as >> s) & 1U)});
        }
        const double p = expit(theta[static_cast<Eigen::Index>(model.covariate_index(t, xs, as))]);
        row.probs = {1.0 - p, p};
        section.push_back(std::move(row));
      }
    }
  }
  for (int t = 0; t <= horizon; ++t) spec.protocol[t].push_back({{}, {0.5}});
  auto& outcome = spec.outcome[k];
  for (unsigned xs = 0; xs < (1U << (k + 1)); ++xs) {
    for (unsigned as = 0; as < (1U << (k + 1)); ++as) {
      TabularSpec::Row row;
      for (int s = 0; s <= k; ++s) {
        row.pattern.push_back(M{V::covariate, s, double((xs >> s) & 1U)});
        row.pattern.push_back(M{V::treatment, s, double((as >> s) & 1U)});
      }
      row.probs = {expit(theta[static_cast<Eigen::Index>(model.outcome_index(xs, as))])};
      outcome.push_back(std::move(row));
    }
  }
  return spec;
}

// Largest deviation of the tabular law's oracle blips (and pinned baselines)
// from the targets.
double verify_with_oracle(const TabularSpec& spec, std::span<const BlipTarget> targets) {
  const TabularModel model = make_tabular_model(spec, "probe");
  double worst = 0.0;
  for (const auto& target : targets) {
    EstimandSpec est;
    est.t = target.m;
    est.delta = target.delta;
    est.summary = Summary::full_history();
    const BlipTable table = excursion_blip(model.dgp, *model.protocol, est);
    for (const auto& e : table.entries) {
      worst = std::max(worst, std::abs(e.blip - target.blip));
      if (target.baseline) worst = std::max(worst, std::abs(e.denominator_mean - *target.baseline));
    }
  }
  return worst;
}

}  // namespace

ProbeResult variation_independence_probe(std::span<const BlipTarget> targets, const ProbeOptions& options) {
  if (options.model_size < 1 || options.model_size > 3) throw RangeError("probe model size must be in [1, 3]");
  if (targets.empty()) throw ValidationError("probe needs at least one target");
  const int k = targets.front().m + targets.front().delta - 1;
  std::vector<BlipTarget> sorted(targets.begin(), targets.end());
  std::sort(sorted.begin(), sorted.end(), [](const BlipTarget& a, const BlipTarget& b) { return a.m < b.m; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& target = sorted[i];
    if (target.m < 0 || target.delta < 1) throw RangeError("probe target needs m >= 0 and delta >= 1");
    if (target.m + target.delta - 1 != k) throw ValidationError("probe targets must share the endpoint m + delta");
    if (k > options.model_size) throw RangeError("probe endpoint exceeds the model horizon");
    if (!std::isfinite(target.blip)) throw ValidationError("probe target blips must be finite");
    if (i > 0 && sorted[i - 1].m == target.m) throw ValidationError("duplicate probe target at m=" + std::to_string(target.m));
    if (i > 0 && target.baseline) throw ValidationError("only the earliest probe target may pin a baseline");
  }

  ProbeResult result;
  // E{Y(ā) | H_m0} = b·exp(Σ_{m: a_m = 1} β_m), so some regime's mean leaves (0, 1].
  if (const auto& b = sorted.front().baseline) {
    double positive = 0.0;
    for (const auto& target : sorted) positive += std::max(target.blip, 0.0);
    const double worst = *b * std::exp(positive);
    if (!(*b > 0.0 && *b <= 1.0)) {
      result.status = ProbeStatus::infeasible;
      result.certificate = "baseline mean " + format_number(*b) + " is not a Bernoulli mean in (0, 1]";
      return result;
    }
    if (worst > 1.0) {
      result.status = ProbeStatus::infeasible;
      result.certificate = "E{Y_" + std::to_string(k) + "(ones at every positive-blip time) | H_" +
                           std::to_string(sorted.front().m) + "} = " + format_number(*b) + " * exp(" +
                           format_number(positive) + ") = " + format_number(worst) + " > 1";
      return result;
    }
  }

  const BinaryModel model(k);
  const auto n = static_cast<Eigen::Index>(model.size());
  CounterStream rng(options.seed, 0x9b0be, 0);
  Eigen::VectorXd theta(n);
  const double y_start = sorted.front().baseline ? std::log(*sorted.front().baseline / (1.0 - std::min(*sorted.front().baseline, 0.999)))
                                                 : -1.5;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double noise = 0.5 * (rng.uniform() - 0.5);
    theta[i] = static_cast<std::size_t>(i) >= model.outcome_index(0, 0) ? y_start + noise : noise;
  }

  const double target_tol = 1e-3 * options.tolerance;
  Eigen::VectorXd r = probe_residuals(model, theta, sorted);
  double cost = 0.5 * r.squaredNorm();
  double lambda = 1e-3;
  int iter = 0;
  for (; iter < options.max_iterations && r.lpNorm<Eigen::Infinity>() > target_tol; ++iter) {
    Eigen::MatrixXd jac(r.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
      Eigen::VectorXd up = theta;
      Eigen::VectorXd down = theta;
      up[j] += h;
      down[j] -= h;
      jac.col(j) = (probe_residuals(model, up, sorted) - probe_residuals(model, down, sorted)) / (2.0 * h);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal().array() += lambda * (1.0 + jtj.diagonal().array());
      const Eigen::VectorXd step = lhs.ldlt().solve(-grad);
      const Eigen::VectorXd trial = theta + step;
      const Eigen::VectorXd r_trial = probe_residuals(model, trial, sorted);
      const double trial_cost = 0.5 * r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        theta = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
  }
  result.iterations = iter;
  result.max_residual = r.lpNorm<Eigen::Infinity>();
  if (result.max_residual > target_tol) {
    result.status = ProbeStatus::not_converged;
    return result;
  }
  TabularSpec spec = to_spec(model, theta, options.model_size);
  result.max_residual = verify_with_oracle(spec, sorted);
  if (result.max_residual > options.tolerance) {
    result.status = ProbeStatus::not_converged;
    return result;
  }
  result.status = ProbeStatus::feasible;
  result.distribution = std::move(spec);
  return result;
}

}  // namespace excursion
