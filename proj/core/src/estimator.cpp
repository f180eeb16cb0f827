#include "excursion/estimator.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"

namespace excursion {

namespace {

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
  std::vector<const PersonTrialRow*> rows;
  Eigen::Index n_alpha = 0;
};

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Design build_design(const PersonTrialTable& table, const ExcursionModel& model) {
  Design d;
  const auto n_alpha = static_cast<Eigen::Index>(model.nuisance_names.size());
  const auto n_beta = static_cast<Eigen::Index>(model.blip_names.size());
  d.n_alpha = n_alpha;
  for (const auto& row : table.rows) {
    if (!row.eligible) continue;
    if (model.enrollment_time && row.t != *model.enrollment_time) continue;
    d.rows.push_back(&row);
  }
  if (d.rows.empty()) throw NoDataError("no eligible person-trial rows to fit");
  const auto n = static_cast<Eigen::Index>(d.rows.size());
  d.x.resize(n, n_alpha + n_beta);
  d.y.resize(n);
  d.w.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const PersonTrialRow& row = *d.rows[static_cast<std::size_t>(r)];
    const auto g = model.nuisance_design(row);
    const auto f = model.blip_design(row);
    if (static_cast<Eigen::Index>(g.size()) != n_alpha || static_cast<Eigen::Index>(f.size()) != n_beta) {
      throw ValidationError("design function returned the wrong number of columns");
    }
    d.x.row(r).head(n_alpha) = to_vector(g).transpose();
    d.x.row(r).tail(n_beta) = static_cast<double>(row.a) * to_vector(f).transpose();
    d.y[r] = row.y;
    d.w[r] = row.weight;
  }
  return d;
}

double pseudo_loglik(const Design& d, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = d.x * theta;
  return (d.w.array() * (d.y.array() * eta.array() - eta.array().exp())).sum();
}

// Unweighted Poisson fit of y on the nuisance columns; the Newton start for α.
Eigen::VectorXd initial_alpha(const Design& d) {
  const Eigen::MatrixXd g = d.x.leftCols(d.n_alpha);
  const double ybar = d.y.mean();
  Eigen::VectorXd alpha = g.colPivHouseholderQr().solve(Eigen::VectorXd::Constant(g.rows(), std::log(ybar)));
  auto loglik = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd eta = g * a;
    return (d.y.array() * eta.array() - eta.array().exp()).sum();
  };
  double ll = loglik(alpha);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd mu = (g * alpha).array().exp();
    const Eigen::VectorXd score = g.transpose() * (d.y - mu);
    if (score.lpNorm<Eigen::Infinity>() <= 1e-10 * static_cast<double>(g.rows())) break;
    const Eigen::MatrixXd info = g.transpose() * mu.asDiagonal() * g;
    const Eigen::VectorXd step = info.ldlt().solve(score);
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      const Eigen::VectorXd trial = alpha + scale * step;
      const double trial_ll = loglik(trial);
      if (std::isfinite(trial_ll) && trial_ll >= ll) {
        alpha = trial;
        ll = trial_ll;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return alpha;
}

// Column offset of each time's propensity coefficients in the stacked parameter.
struct PropensityBlocks {
  std::map<int, Eigen::Index> offset;
  Eigen::Index size = 0;
};

}  // namespace

ExcursionModel ExcursionModel::linear_in_summary(const PersonTrialTable& table, std::optional<int> enrollment_time) {
  ExcursionModel model;
  model.blip_names.push_back("intercept");
  for (const auto& name : table.feature_names) model.blip_names.push_back(name);
  model.nuisance_names = model.blip_names;
  model.blip_design = [](const PersonTrialRow& row) {
    std::vector<double> v{1.0};
    v.insert(v.end(), row.features.begin(), row.features.end());
    return v;
  };
  model.nuisance_design = model.blip_design;
  model.enrollment_time = enrollment_time;
  return model;
}

double EstimationResult::beta_se(std::size_t i) const {
  return std_errors[alpha_hat.size() + static_cast<Eigen::Index>(i)];
}

double EstimationResult::alpha_se(std::size_t i) const { return std_errors[static_cast<Eigen::Index>(i)]; }

std::string EstimationResult::diagnostics() const {
  std::ostringstream out;
  out << "person_trials=" << n_person_trials << '\n'
      << "subjects=" << n_subjects << '\n'
      << "newton_iterations=" << iterations << '\n'
      << "max_abs_mean_score=" << format_number(max_abs_score) << '\n'
      << "propensities=" << propensity_mode << '\n'
      << "truncation=" << (truncation ? format_number(*truncation) : std::string("none")) << '\n';
  return out.str();
}

EstimationResult fit_excursion_model(const PersonTrialTable& table, const ExcursionModel& model,
                                     const FitOptions& options) {
  if (!table.weighted) throw UsageError("compute weights before fitting the excursion model");
  if (!table.source) throw UsageError("person-trial table has no source dataset");
  const Design d = build_design(table, model);
  const auto p = d.x.cols();
  const auto n_subjects = static_cast<double>(table.source->size());

  if ((d.w.array() * d.y.array()).sum() <= 0.0) throw NoDataError("no outcome events with positive weight");
  {
    const Eigen::MatrixXd xw = d.w.array().sqrt().matrix().asDiagonal() * d.x;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    if (qr.rank() < p) {
      throw RankDeficiencyError("weighted design has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p));
    }
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  theta.head(d.n_alpha) = initial_alpha(d);
  double ll = pseudo_loglik(d, theta);
  int iter = 0;
  bool converged = false;
  Eigen::VectorXd score;
  for (;; ++iter) {
    const Eigen::VectorXd mu = (d.x * theta).array().exp();
    score = d.x.transpose() * (d.w.array() * (d.y - mu).array()).matrix();
    if (score.lpNorm<Eigen::Infinity>() / n_subjects <= options.score_tolerance) {
      converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;
    const Eigen::MatrixXd info = d.x.transpose() * (d.w.array() * mu.array()).matrix().asDiagonal() * d.x;
    const Eigen::VectorXd step = info.ldlt().solve(score);
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half, scale *= 0.5) {
      const Eigen::VectorXd trial = theta + scale * step;
      const double trial_ll = pseudo_loglik(d, trial);
      // Near the root the objective change is below rounding, so allow that slack.
      if (std::isfinite(trial_ll) && trial_ll >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        theta = trial;
        ll = trial_ll;
        moved = true;
        break;
      }
    }
    // Rounding floor: no representable improvement and the score is already tiny.
    if (!moved || (scale * step).lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + theta.lpNorm<Eigen::Infinity>())) {
      const Eigen::VectorXd mu_now = (d.x * theta).array().exp();
      score = d.x.transpose() * (d.w.array() * (d.y - mu_now).array()).matrix();
      converged = score.lpNorm<Eigen::Infinity>() / n_subjects <= 1e-9;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("excursion model did not converge after " + std::to_string(iter) +
                           " Newton iterations (mean score " + format_number(score.lpNorm<Eigen::Infinity>() / n_subjects) +
                           ")");
  }

  // Sandwich, clustered on subject.
  const Eigen::VectorXd mu = (d.x * theta).array().exp();
  const Eigen::VectorXd resid = d.y - mu;
  const Eigen::MatrixXd a_tt = d.x.transpose() * (d.w.array() * mu.array()).matrix().asDiagonal() * d.x / n_subjects;

  const auto n_sub = static_cast<Eigen::Index>(table.source->size());
  const PropensityModel* prop = table.weight_source == "estimated" ? table.propensity.get() : nullptr;
  PropensityBlocks blocks;
  if (prop != nullptr) {
    const auto q = static_cast<Eigen::Index>(prop->features().names.size());
    for (const auto& [t, coef] : prop->coefficients()) {
      blocks.offset[t] = blocks.size;
      blocks.size += q;
    }
  }
  const Eigen::Index total = p + blocks.size;
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(n_sub, total);
  Eigen::MatrixXd a_full = Eigen::MatrixXd::Zero(total, total);
  a_full.topLeftCorner(p, p) = a_tt;

  auto clipped = [&](double raw) {
    return table.truncation && (raw < *table.truncation || raw > 1.0 - *table.truncation);
  };

  for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
    const PersonTrialRow& row = *d.rows[static_cast<std::size_t>(r)];
    const Eigen::VectorXd u = d.w[r] * resid[r] * d.x.row(r).transpose();
    psi.row(row.subject).head(p) += u.transpose();
    if (prop == nullptr || d.w[r] == 0.0) continue;
    const Trajectory& path = table.source->subjects[static_cast<std::size_t>(row.subject)];
    Eigen::VectorXd dlogw = Eigen::VectorXd::Zero(blocks.size);
    {
      const History h = history_at(path, row.t);
      const double raw = prop->predict(h);
      if (!clipped(raw)) {
        dlogw.segment(blocks.offset.at(row.t), prop->features().names.size()) =
            -(static_cast<double>(row.a) - raw) * prop->features()(h);
      }
    }
    for (int s = row.t + 1; s <= row.t + table.delta - 1; ++s) {
      if (path.availability[static_cast<std::size_t>(s)] == 0) continue;
      const History h = history_at(path, s);
      const double raw = prop->predict(h);
      if (!clipped(raw)) {
        dlogw.segment(blocks.offset.at(s), prop->features().names.size()) += raw * prop->features()(h);
      }
    }
    a_full.topRightCorner(p, blocks.size) -= u * dlogw.transpose() / n_subjects;
  }

  if (prop != nullptr) {
    const auto q = static_cast<Eigen::Index>(prop->features().names.size());
    for (Eigen::Index i = 0; i < n_sub; ++i) {
      const Trajectory& path = table.source->subjects[static_cast<std::size_t>(i)];
      for (const auto& [t, off] : blocks.offset) {
        if (path.availability[static_cast<std::size_t>(t)] == 0) continue;
        const History h = history_at(path, t);
        const Eigen::VectorXd z = prop->features()(h);
        const double pt = prop->predict(h);
        psi.row(i).segment(p + off, q) += (path.treatments[static_cast<std::size_t>(t)] - pt) * z.transpose();
        a_full.block(p + off, p + off, q, q) += pt * (1.0 - pt) * z * z.transpose() / n_subjects;
      }
    }
  }

  const Eigen::MatrixXd b = psi.transpose() * psi / n_subjects;
  const Eigen::MatrixXd a_inv = a_full.fullPivLu().inverse();
  Eigen::MatrixXd cov = (a_inv * b * a_inv.transpose() / n_subjects).topLeftCorner(p, p);
  cov = 0.5 * (cov + cov.transpose()).eval();

  EstimationResult result;
  for (const auto& name : model.nuisance_names) result.alpha_names.push_back("alpha:" + name);
  for (const auto& name : model.blip_names) result.beta_names.push_back("beta:" + name);
  result.alpha_hat = theta.head(d.n_alpha);
  result.beta_hat = theta.tail(p - d.n_alpha);
  result.covariance = cov;
  result.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  result.n_person_trials = static_cast<int>(d.x.rows());
  result.n_subjects = static_cast<int>(n_sub);
  result.iterations = iter;
  result.max_abs_score = score.lpNorm<Eigen::Infinity>() / n_subjects;
  result.propensity_mode = table.weight_source;
  result.truncation = table.truncation;
  return result;
}

const char* to_string(PropensityMode mode) { return mode == PropensityMode::known ? "known" : "estimated"; }

PropensityMode parse_propensity_mode(const std::string& text) {
  if (text == "known") return PropensityMode::known;
  if (text == "estimated") return PropensityMode::estimated;
  throw ParseError("--propensities must be 'known' or 'estimated', got '" + text + "'");
}

EstimationResult emulate_series(std::shared_ptr<const Dataset> dataset, const EligibilitySpec& eligibility, int delta,
                                const Summary& summary, const Protocol* protocol, const EmulationOptions& options) {
  StackOptions stack_options;
  stack_options.enrollment_time = options.enrollment_time;
  const PersonTrialTable stacked = stack_person_trials(dataset, eligibility, delta, summary, stack_options);
  PersonTrialTable weighted;
  if (options.mode == PropensityMode::known) {
    if (protocol == nullptr) throw UsageError("known propensities need the protocol");
    weighted = compute_weights(stacked, *protocol, options.weights);
  } else {
    auto model = std::make_shared<const PropensityModel>(fit_propensities(*dataset, options.propensity_features));
    weighted = compute_weights(stacked, model, options.weights);
  }
  return fit_excursion_model(weighted, ExcursionModel::linear_in_summary(weighted, options.enrollment_time),
                             options.fit);
}

void write_estimation_csv(std::ostream& out, const EstimationResult& result) {
  out << "name,estimate,se\n";
  for (std::size_t i = 0; i < result.alpha_names.size(); ++i) {
    out << result.alpha_names[i] << ',' << format_number(result.alpha_hat[static_cast<Eigen::Index>(i)]) << ','
        << format_number(result.alpha_se(i)) << '\n';
  }
  for (std::size_t i = 0; i < result.beta_names.size(); ++i) {
    out << result.beta_names[i] << ',' << format_number(result.beta_hat[static_cast<Eigen::Index>(i)]) << ','
        << format_number(result.beta_se(i)) << '\n';
  }
  std::istringstream diag(result.diagnostics());
  std::string line;
  while (std::getline(diag, line)) out << "# " << line << '\n';
}

}  // namespace excursion
