#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace excursion {

/// One subject's path over t = 0..T.
///
/// Per time t the record is, in order: covariate X_t, availability I*_t,
/// trial eligibility I_t, treatment A_t, then the binary outcome Y_t observed
/// after A_t. X_{T+1} is not stored; Y_T is the terminal measurement.
struct Trajectory {
  std::vector<double> covariates;  // X_0..X_T
  std::vector<int> availability;   // I*_0..I*_T
  std::vector<int> eligibility;    // I_0..I_T
  std::vector<int> treatments;     // A_0..A_T
  std::vector<int> outcomes;       // Y_0..Y_T

  Trajectory() = default;
  /// Zero-filled path for horizon T.
  explicit Trajectory(int horizon);

  int horizon() const noexcept { return static_cast<int>(treatments.size()) - 1; }

  /// Y_{t,Δ}: the outcome observed after A_{t+Δ-1}.
  int outcome_after(int t, int delta) const;

  /// Throws ValidationError on ragged vectors, non-binary entries, A_t = 1 with
  /// I*_t = 0, I_t = 1 with I*_t = 0, or (if `absorbing`) a decreasing outcome.
  void validate(bool absorbing = false) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// H_t = (X_0..X_t, A_0..A_{t-1}) together with the past availability flags and
/// past outcomes, which are components of X in the longitudinal notation.
struct History {
  int time = 0;
  std::vector<double> covariates;  // X_0..min(t, T)
  std::vector<int> treatments;     // A_0..A_{t-1}
  std::vector<int> availability;   // I*_0..I*_{t-1}
  std::vector<int> outcomes;       // Y_0..Y_{t-1}

  double covariate(int s) const { return covariates.at(static_cast<std::size_t>(s)); }
  int treatment(int s) const { return treatments.at(static_cast<std::size_t>(s)); }
  /// A_{t-1}, or 0 at t = 0.
  int last_treatment() const { return treatments.empty() ? 0 : treatments.back(); }

  friend bool operator==(const History&, const History&) = default;
};

/// Copies the prefix H_t out of `trajectory`; valid for 0 <= t <= T+1.
/// Throws RangeError otherwise.
History history_at(const Trajectory& trajectory, int t);

struct Dataset {
  int horizon = 0;
  std::vector<Trajectory> subjects;

  std::size_t size() const noexcept { return subjects.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// CSV with header `subject,t,x,a,istar,i,y`, one row per (subject, t).
/// Leading `#` lines are comments. Covariates are written in shortest
/// round-trip form so that read(write(d)) == d.
void write_dataset_csv(std::ostream& out, const Dataset& dataset);
Dataset read_dataset_csv(std::istream& in);

}  // namespace excursion
