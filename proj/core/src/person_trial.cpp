#include "excursion/person_trial.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"
#include "excursion/propensity.hpp"

namespace excursion {

namespace {

std::vector<std::string> feature_names_for(const Summary& summary) {
  std::vector<std::string> names;
  if (!summary.width() || *summary.width() == 0) return names;
  std::stringstream ss(summary.name());
  std::string item;
  while (std::getline(ss, item, ',')) names.push_back(item);
  if (names.size() != *summary.width()) {
    names.clear();
    for (std::size_t j = 0; j < *summary.width(); ++j) names.push_back(summary.name() + "_" + std::to_string(j));
  }
  return names;
}

double clip(double p, const std::optional<double>& eps) {
  if (!eps) return p;
  return std::clamp(p, *eps, 1.0 - *eps);
}

std::string where(const PersonTrialRow& row, int t) {
  return "subject " + std::to_string(row.subject) + ", t=" + std::to_string(t);
}

template <typename ProbFn>
PersonTrialTable weigh(const PersonTrialTable& table, const WeightOptions& options, ProbFn prob) {
  if (!table.source) throw UsageError("person-trial table has no source dataset");
  if (options.truncation && !(*options.truncation > 0.0 && *options.truncation < 0.5)) {
    throw ValidationError("truncation epsilon must lie in (0, 0.5)");
  }
  PersonTrialTable out = table;
  out.weighted = true;
  out.truncation = options.truncation;
  for (auto& row : out.rows) {
    if (!row.eligible) {
      row.assignment_prob = 0.0;
      row.ipw = row.j_weight = row.weight = 0.0;
      continue;
    }
    const Trajectory& path = table.source->subjects.at(static_cast<std::size_t>(row.subject));
    const double p = clip(prob(history_at(path, row.t)), options.truncation);
    row.assignment_prob = p;
    const double denom = row.a == 1 ? p : 1.0 - p;
    if (!(denom > 0.0)) {
      throw PositivityError("P(A_t = " + std::to_string(row.a) + " | H_t) = 0 at " + where(row, row.t));
    }
    row.ipw = 1.0 / denom;
    double j = 1.0;
    for (int s = row.t + 1; s <= row.t + table.delta - 1; ++s) {
      if (path.treatments[static_cast<std::size_t>(s)] == 1) {
        j = 0.0;
        break;
      }
    }
    for (int s = row.t + 1; j > 0.0 && s <= row.t + table.delta - 1; ++s) {
      if (path.availability[static_cast<std::size_t>(s)] == 0) continue;
      const double ps = clip(prob(history_at(path, s)), options.truncation);
      if (!(1.0 - ps > 0.0)) throw PositivityError("P(A_j = 0 | H_j) = 0 at " + where(row, s));
      j /= 1.0 - ps;
    }
    row.j_weight = j;
    row.weight = row.ipw * j;
  }
  return out;
}

}  // namespace

PersonTrialTable stack_person_trials(std::shared_ptr<const Dataset> dataset, const EligibilitySpec& eligibility,
                                     int delta, const Summary& features, const StackOptions& options) {
  if (!dataset) throw UsageError("stack_person_trials needs a dataset");
  const int horizon = dataset->horizon;
  if (delta < 1 || delta > horizon + 1) {
    throw RangeError("delta=" + std::to_string(delta) + " must lie in [1, T+1] = [1, " + std::to_string(horizon + 1) +
                     "]");
  }
  const int last = horizon - delta + 1;
  int first_t = 0;
  int last_t = last;
  if (options.enrollment_time) {
    if (*options.enrollment_time < 0 || *options.enrollment_time > last) {
      throw RangeError("no emulated trial enrolls at t=" + std::to_string(*options.enrollment_time) + " when delta=" +
                       std::to_string(delta));
    }
    first_t = last_t = *options.enrollment_time;
  }
  PersonTrialTable table;
  table.source = dataset;
  table.delta = delta;
  table.features = features;
  table.feature_names = feature_names_for(features);
  for (int t = first_t; t <= last_t; ++t) table.trial_counts[t] = 0;
  for (std::size_t i = 0; i < dataset->subjects.size(); ++i) {
    const Trajectory& path = dataset->subjects[i];
    if (path.horizon() != horizon) throw ValidationError("subject " + std::to_string(i) + " has a different horizon");
    for (int t = first_t; t <= last_t; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      const History h = history_at(path, t);
      const int avail = eligibility.availability(h, path.availability[ti]);
      const int eligible = eligibility.trial(h, avail);
      if (!eligible && !options.keep_ineligible) continue;
      PersonTrialRow row;
      row.subject = static_cast<int>(i);
      row.t = t;
      row.eligible = eligible;
      row.a = path.treatments[ti];
      row.y = path.outcome_after(t, delta);
      row.features = features(h);
      table.rows.push_back(std::move(row));
      if (eligible) ++table.trial_counts[t];
    }
  }
  return table;
}

PersonTrialTable compute_weights(const PersonTrialTable& table, const Protocol& protocol,
                                 const WeightOptions& options) {
  PersonTrialTable out = weigh(table, options, [&](const History& h) { return protocol.probability(h); });
  out.weight_source = "known";
  return out;
}

PersonTrialTable compute_weights(const PersonTrialTable& table, std::shared_ptr<const PropensityModel> model,
                                 const WeightOptions& options) {
  if (!model) throw UsageError("compute_weights needs a propensity model");
  PersonTrialTable out = weigh(table, options, [&](const History& h) { return model->predict(h); });
  out.weight_source = "estimated";
  out.propensity = std::move(model);
  return out;
}

void write_person_trial_csv(std::ostream& out, const PersonTrialTable& table) {
  out << "subject,t,eligible,a_t,y,weight,j_weight";
  for (const auto& name : table.feature_names) out << ',' << name;
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.subject << ',' << row.t << ',' << row.eligible << ',' << row.a << ',' << row.y << ','
        << format_number(row.weight) << ',' << format_number(row.j_weight);
    for (double f : row.features) out << ',' << format_number(f);
    out << '\n';
  }
}

}  // namespace excursion
