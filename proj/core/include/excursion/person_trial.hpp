#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "excursion/oracle.hpp"
#include "excursion/protocol.hpp"
#include "excursion/trajectory.hpp"

namespace excursion {

class PropensityModel;

/// One subject enrolled in the emulated trial starting at t.
struct PersonTrialRow {
  int subject = 0;
  int t = 0;
  int eligible = 1;
  int a = 0;                     ///< A_t
  int y = 0;                     ///< Y_{t,Δ}
  double assignment_prob = 0.0;  ///< p_t(H_t); set by compute_weights
  double ipw = 1.0;              ///< 1(A_t=1)/p_t + 1(A_t=0)/(1-p_t)
  double j_weight = 1.0;         ///< prod_{j=t+1}^{t+Δ-1} 1(A_j=0)/(1 - p_j I*_j)
  double weight = 1.0;           ///< ipw * j_weight
  std::vector<double> features;  ///< S_t
};

/// Person-trial stack: every subject enrolled in each emulated trial
/// t = 0..T-Δ+1 for which they are eligible.
struct PersonTrialTable {
  std::shared_ptr<const Dataset> source;
  int delta = 1;
  Summary features = Summary::empty();
  std::vector<std::string> feature_names;
  std::vector<PersonTrialRow> rows;
  std::map<int, int> trial_counts;  ///< rows per enrollment time

  bool weighted = false;
  std::string weight_source;  ///< "known" or "estimated"
  std::optional<double> truncation;
  std::shared_ptr<const PropensityModel> propensity;  ///< set for estimated weights
};

struct StackOptions {
  bool keep_ineligible = false;
  /// Stack only the trial enrolling at this t (features are only evaluated there).
  std::optional<int> enrollment_time;
};

/// Throws RangeError if Δ < 1 or Δ > T + 1, or the enrollment time has no trial.
PersonTrialTable stack_person_trials(std::shared_ptr<const Dataset> dataset, const EligibilitySpec& eligibility,
                                     int delta, const Summary& features = Summary::empty(),
                                     const StackOptions& options = {});

struct WeightOptions {
  /// Opt-in clipping of probabilities into [ε, 1-ε]; recorded on the table.
  std::optional<double> truncation;
};

/// Inverse-probability weights from a known protocol or fitted propensities.
/// Throws PositivityError naming (subject, t) on a zero denominator.
PersonTrialTable compute_weights(const PersonTrialTable& table, const Protocol& protocol,
                                 const WeightOptions& options = {});
PersonTrialTable compute_weights(const PersonTrialTable& table, std::shared_ptr<const PropensityModel> model,
                                 const WeightOptions& options = {});

/// CSV header `subject,t,eligible,a_t,y,weight,j_weight,<features>`.
void write_person_trial_csv(std::ostream& out, const PersonTrialTable& table);

}  // namespace excursion
