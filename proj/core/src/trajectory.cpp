#include "excursion/trajectory.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"

namespace excursion {

namespace {

template <typename T>
std::vector<T> prefix(const std::vector<T>& v, int count) {
  return std::vector<T>(v.begin(), v.begin() + count);
}

bool binary(int v) { return v == 0 || v == 1; }

}  // namespace

Trajectory::Trajectory(int horizon) {
  if (horizon < 0) throw RangeError("horizon must be >= 0");
  const auto n = static_cast<std::size_t>(horizon + 1);
  covariates.assign(n, 0.0);
  availability.assign(n, 0);
  eligibility.assign(n, 0);
  treatments.assign(n, 0);
  outcomes.assign(n, 0);
}

int Trajectory::outcome_after(int t, int delta) const {
  const int k = t + delta - 1;
  if (t < 0 || delta < 1 || k > horizon()) {
    throw RangeError("Y_{t,delta} with t=" + std::to_string(t) + ", delta=" + std::to_string(delta) +
                     " is outside horizon " + std::to_string(horizon()));
  }
  return outcomes[static_cast<std::size_t>(k)];
}

void Trajectory::validate(bool absorbing) const {
  const auto n = treatments.size();
  if (n == 0 || covariates.size() != n || availability.size() != n || eligibility.size() != n ||
      outcomes.size() != n) {
    throw ValidationError("trajectory vectors have inconsistent lengths");
  }
  for (std::size_t t = 0; t < n; ++t) {
    const std::string at = " at t=" + std::to_string(t);
    if (!binary(treatments[t]) || !binary(availability[t]) || !binary(eligibility[t]) || !binary(outcomes[t])) {
      throw ValidationError("non-binary indicator" + at);
    }
    if (availability[t] == 0 && treatments[t] == 1) throw ValidationError("treated while unavailable" + at);
    if (availability[t] == 0 && eligibility[t] == 1) throw ValidationError("trial-eligible while unavailable" + at);
    if (absorbing && t > 0 && outcomes[t] < outcomes[t - 1]) throw ValidationError("absorbing outcome decreased" + at);
  }
}

History history_at(const Trajectory& trajectory, int t) {
  const int horizon = trajectory.horizon();
  if (t < 0 || t > horizon + 1) {
    throw RangeError("history time " + std::to_string(t) + " outside [0, " + std::to_string(horizon + 1) + "]");
  }
  History h;
  h.time = t;
  h.covariates = prefix(trajectory.covariates, std::min(t, horizon) + 1);
  h.treatments = prefix(trajectory.treatments, t);
  h.availability = prefix(trajectory.availability, t);
  h.outcomes = prefix(trajectory.outcomes, t);
  return h;
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  out << "subject,t,x,a,istar,i,y\n";
  for (std::size_t s = 0; s < dataset.subjects.size(); ++s) {
    const auto& tr = dataset.subjects[s];
    for (std::size_t t = 0; t < tr.treatments.size(); ++t) {
      out << s << ',' << t << ',' << format_exact(tr.covariates[t]) << ',' << tr.treatments[t] << ','
          << tr.availability[t] << ',' << tr.eligibility[t] << ',' << tr.outcomes[t] << '\n';
    }
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  bool header_seen = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "subject,t,x,a,istar,i,y") throw ParseError("unexpected dataset header: '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) throw ParseError("dataset row needs 7 fields: '" + line + "'");
    rows.push_back(std::move(fields));
  }
  if (!header_seen) throw ParseError("dataset is missing its header row");

  Dataset d;
  int horizon = -1;
  for (const auto& r : rows) horizon = std::max(horizon, static_cast<int>(parse_integer(r[1], "time")));
  d.horizon = std::max(horizon, 0);
  long long expected_subject = -1;
  int expected_t = 0;
  for (const auto& r : rows) {
    const auto subject = parse_integer(r[0], "subject");
    const auto t = static_cast<int>(parse_integer(r[1], "time"));
    if (t == 0) {
      if (expected_t != 0 && expected_t != d.horizon + 1) throw ParseError("subject rows are incomplete");
      if (subject != expected_subject + 1) throw ParseError("subjects must be numbered 0, 1, ... in order");
      expected_subject = subject;
      d.subjects.emplace_back(d.horizon);
      expected_t = 0;
    }
    if (subject != expected_subject || t != expected_t) throw ParseError("rows must be ordered by (subject, t)");
    auto& tr = d.subjects.back();
    const auto idx = static_cast<std::size_t>(t);
    tr.covariates[idx] = parse_double(r[2], "covariate");
    tr.treatments[idx] = static_cast<int>(parse_integer(r[3], "treatment"));
    tr.availability[idx] = static_cast<int>(parse_integer(r[4], "availability"));
    tr.eligibility[idx] = static_cast<int>(parse_integer(r[5], "eligibility"));
    tr.outcomes[idx] = static_cast<int>(parse_integer(r[6], "outcome"));
    ++expected_t;
  }
  if (!d.subjects.empty() && expected_t != d.horizon + 1) throw ParseError("last subject's rows are incomplete");
  for (const auto& tr : d.subjects) tr.validate();
  return d;
}

}  // namespace excursion
