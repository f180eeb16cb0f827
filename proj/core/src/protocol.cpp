#include "excursion/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"

namespace excursion {

Protocol::Protocol(int horizon, Rule rule, std::string description)
    : horizon_(horizon), rule_(std::move(rule)), description_(std::move(description)) {
  if (horizon_ < 0) throw ValidationError("protocol horizon must be >= 0");
  if (!rule_) throw ValidationError("protocol rule is empty");
}

Protocol Protocol::constant(int horizon, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("protocol probability " + format_number(p) + " outside [0,1]");
  return Protocol(horizon, [p](const History&) { return p; }, "constant p=" + format_number(p));
}

double Protocol::probability(const History& history) const {
  if (history.time < 0 || history.time > horizon_) {
    throw RangeError("protocol has no rule for t=" + std::to_string(history.time));
  }
  const double p = rule_(history);
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError("protocol probability " + format_number(p) + " outside [0,1] at t=" +
                          std::to_string(history.time));
  }
  return p;
}

std::vector<History> positivity_violations(const Protocol& protocol, const std::vector<History>& available_histories) {
  std::vector<History> bad;
  for (const auto& h : available_histories) {
    const double p = protocol.probability(h);
    if (p <= 0.0 || p >= 1.0) bad.push_back(h);
  }
  return bad;
}

const char* to_string(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::static_path: return "static-path";
    case RegimeKind::deterministic_dynamic: return "deterministic-dynamic";
    case RegimeKind::random_policy: return "random-policy";
  }
  return "?";
}

Regime Regime::static_path(int start, std::vector<int> actions, std::optional<int> tail) {
  if (start < 0) throw RangeError("regime start must be >= 0");
  for (int a : actions) {
    if (a != 0 && a != 1) throw ValidationError("static regime actions must be 0 or 1");
  }
  if (tail && *tail != 0 && *tail != 1) throw ValidationError("static regime tail must be 0 or 1");
  Regime r;
  Segment s;
  s.start = start;
  s.kind = RegimeKind::static_path;
  s.first_time = start;
  s.actions = std::move(actions);
  s.tail = tail;
  r.name_ = "static(";
  for (std::size_t i = 0; i < s.actions.size(); ++i) r.name_ += (i ? "," : "") + std::to_string(s.actions[i]);
  if (tail) r.name_ += std::string(s.actions.empty() ? "" : ",") + std::to_string(*tail) + "...";
  r.name_ += ")@" + std::to_string(start);
  r.segments_.push_back(std::move(s));
  return r;
}

Regime Regime::constant(int start, int action) {
  Regime r = static_path(start, {}, action);
  r.name_ = "always" + std::to_string(action) + "@" + std::to_string(start);
  return r;
}

Regime Regime::dynamic(int start, DynamicRule rule, std::string name) {
  if (start < 0) throw RangeError("regime start must be >= 0");
  if (!rule) throw ValidationError("dynamic regime rule is empty");
  Regime r;
  Segment s;
  s.start = start;
  s.kind = RegimeKind::deterministic_dynamic;
  s.dynamic = std::move(rule);
  r.segments_.push_back(std::move(s));
  r.name_ = std::move(name);
  return r;
}

Regime Regime::random_policy(int start, RandomRule rule, std::string name) {
  if (start < 0) throw RangeError("regime start must be >= 0");
  if (!rule) throw ValidationError("random policy rule is empty");
  Regime r;
  Segment s;
  s.start = start;
  s.kind = RegimeKind::random_policy;
  s.random = std::move(rule);
  r.segments_.push_back(std::move(s));
  r.name_ = std::move(name);
  return r;
}

Regime Regime::carry_forward(int start) {
  return dynamic(start, [](const History& h) { return h.last_treatment(); }, "carry-forward@" + std::to_string(start));
}

Regime Regime::from_protocol(const Protocol& protocol) {
  return random_policy(0, [protocol](const History& h) { return protocol.probability(h); }, "protocol");
}

Regime Regime::followed_by(const Regime& tail) const {
  const int cut = tail.start_time();
  if (cut <= start_time()) throw UsageError("follow-up regime must start after " + std::to_string(start_time()));
  Regime r;
  for (const auto& s : segments_) {
    if (s.start < cut) r.segments_.push_back(s);
  }
  for (const auto& s : tail.segments_) r.segments_.push_back(s);
  r.name_ = name_ + " then " + tail.name_;
  return r;
}

Regime Regime::starting_at(int start) const {
  if (start < start_time()) {
    throw UsageError("regime governs from t=" + std::to_string(start_time()) + ", cannot start at " +
                     std::to_string(start));
  }
  Regime r;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const bool last = i + 1 == segments_.size();
    if (!last && segments_[i + 1].start <= start) continue;
    Segment s = segments_[i];
    s.start = std::max(s.start, start);
    r.segments_.push_back(std::move(s));
  }
  r.name_ = name_;
  return r;
}

RegimeKind Regime::kind() const noexcept {
  RegimeKind k = RegimeKind::static_path;
  for (const auto& s : segments_) {
    if (s.kind == RegimeKind::random_policy) return RegimeKind::random_policy;
    if (s.kind == RegimeKind::deterministic_dynamic) k = RegimeKind::deterministic_dynamic;
  }
  return k;
}

int Regime::start_time() const {
  if (segments_.empty()) throw UsageError("empty regime");
  return segments_.front().start;
}

ActionLaw Regime::law(const History& history) const {
  const int t = history.time;
  const Segment* seg = nullptr;
  for (const auto& s : segments_) {
    if (s.start <= t) seg = &s;
  }
  if (seg == nullptr) {
    throw UsageError("regime '" + name_ + "' does not govern t=" + std::to_string(t));
  }
  switch (seg->kind) {
    case RegimeKind::static_path: {
      const int idx = t - seg->first_time;
      if (idx >= 0 && idx < static_cast<int>(seg->actions.size())) {
        return {static_cast<double>(seg->actions[static_cast<std::size_t>(idx)]), false};
      }
      if (seg->tail) return {static_cast<double>(*seg->tail), false};
      throw RangeError("static regime '" + name_ + "' has no action for t=" + std::to_string(t));
    }
    case RegimeKind::deterministic_dynamic: {
      const int a = seg->dynamic(history);
      if (a != 0 && a != 1) throw ValidationError("dynamic rule returned non-binary action");
      return {static_cast<double>(a), false};
    }
    case RegimeKind::random_policy: {
      const double p = seg->random(history);
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("random policy probability outside [0,1]");
      return {p, true};
    }
  }
  return {};
}

int regime_action(const Regime& regime, const History& history, std::optional<double> draw) {
  const ActionLaw law = regime.law(history);
  if (!law.randomized) return law.p_treat > 0.5 ? 1 : 0;
  if (!draw) throw UsageError("random policy '" + regime.name() + "' needs a uniform draw");
  return *draw < law.p_treat ? 1 : 0;
}

EligibilitySpec EligibilitySpec::all_eligible() { return {}; }

EligibilitySpec EligibilitySpec::exclude_recently_treated() {
  EligibilitySpec e;
  e.trial_rule = [](const History& h) { return h.last_treatment() == 1 ? 0 : 1; };
  e.description = "exclude A_{t-1}=1";
  return e;
}

EligibilitySpec EligibilitySpec::unavailable_at(int time) {
  EligibilitySpec e;
  e.availability_rule = [time](const History& h) { return h.time == time ? 0 : 1; };
  e.description = "unavailable at t=" + std::to_string(time);
  return e;
}

int EligibilitySpec::availability(const History& history, int drawn) const {
  if (drawn == 0) return 0;
  return availability_rule ? (availability_rule(history) != 0 ? 1 : 0) : 1;
}

int EligibilitySpec::trial(const History& history, int availability) const {
  if (availability == 0) return 0;
  return trial_rule ? (trial_rule(history) != 0 ? 1 : 0) : 1;
}

}  // namespace excursion
