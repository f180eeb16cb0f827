#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "excursion/trajectory.hpp"

namespace excursion {

/// Assignment probabilities p_t(H_t) of a sequentially randomized experiment.
class Protocol {
 public:
  using Rule = std::function<double(const History&)>;

  Protocol(int horizon, Rule rule, std::string description);

  /// p_t(H_t) = p for every t and history.
  static Protocol constant(int horizon, double p);

  int horizon() const noexcept { return horizon_; }
  const std::string& description() const noexcept { return description_; }

  /// p_t(H_t); throws ValidationError if the rule leaves [0,1] or t > T.
  double probability(const History& history) const;

 private:
  int horizon_;
  Rule rule_;
  std::string description_;
};

/// Checks 0 < p_t(H_t) < 1 on each given history. Returns the histories that
/// violate positivity (empty when the protocol is positive on all of them).
std::vector<History> positivity_violations(const Protocol& protocol,
                                           const std::vector<History>& available_histories);

enum class RegimeKind { static_path, deterministic_dynamic, random_policy };

const char* to_string(RegimeKind kind);

/// Law of A_t under a regime at one history: P(A_t = 1) and whether that value
/// was drawn by a randomized rule.
struct ActionLaw {
  double p_treat = 0.0;
  bool randomized = false;
};

/// A treatment rule governing t >= start_time().
///
/// Built from segments: each segment governs from its own start until the next
/// segment starts. Static segments store actions by absolute time and may carry
/// a tail action for all later times.
class Regime {
 public:
  using DynamicRule = std::function<int(const History&)>;
  using RandomRule = std::function<double(const History&)>;

  /// a_t = actions[t - start] for t in [start, start + actions.size()), then
  /// `tail` if given; requesting beyond that throws RangeError.
  static Regime static_path(int start, std::vector<int> actions, std::optional<int> tail = {});
  /// a_t = action for all t >= start (g_t ≡ action).
  static Regime constant(int start, int action);
  static Regime dynamic(int start, DynamicRule rule, std::string name);
  static Regime random_policy(int start, RandomRule rule, std::string name);
  /// g_t(H_t) = A_{t-1}; at t = 0 the previous action is taken as 0.
  static Regime carry_forward(int start);
  /// Random policy that reproduces the protocol from t = 0.
  static Regime from_protocol(const Protocol& protocol);

  /// This regime until `tail.start_time()`, then `tail`.
  Regime followed_by(const Regime& tail) const;
  /// Same rules, but only governing t >= start.
  Regime starting_at(int start) const;

  RegimeKind kind() const noexcept;
  int start_time() const;
  const std::string& name() const noexcept { return name_; }

  ActionLaw law(const History& history) const;

 private:
  struct Segment {
    int start = 0;
    RegimeKind kind = RegimeKind::static_path;
    std::vector<int> actions;  // static: absolute-time actions from `first_time`
    int first_time = 0;
    std::optional<int> tail;
    DynamicRule dynamic;
    RandomRule random;
  };

  std::vector<Segment> segments_;
  std::string name_;
};

/// Action of `regime` at `history`. Deterministic kinds ignore `draw`; a
/// random policy needs a uniform draw in [0,1) and throws UsageError without it.
int regime_action(const Regime& regime, const History& history, std::optional<double> draw = {});

/// Which subjects are treatment-available (I*_t) and trial-eligible (I_t).
struct EligibilitySpec {
  using Rule = std::function<int(const History&)>;

  /// Extra availability restriction; I*_t = drawn availability AND this rule.
  Rule availability_rule;
  /// I_t = I*_t AND this rule.
  Rule trial_rule;
  std::string description = "all eligible";

  static EligibilitySpec all_eligible();
  /// I_t = 0 when A_{t-1} = 1.
  static EligibilitySpec exclude_recently_treated();
  /// I*_t forced to 0 at `time`.
  static EligibilitySpec unavailable_at(int time);

  int availability(const History& history, int drawn) const;
  int trial(const History& history, int availability) const;
};

}  // namespace excursion
