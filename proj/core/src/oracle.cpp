#include "excursion/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"
#include "excursion/quadrature.hpp"

namespace excursion {

namespace {

std::string join_label(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "|" : "") + parts[i];
  return out;
}

Summary primitive(char letter, int time) {
  if (time < 0) throw RangeError("summary time must be >= 0");
  const std::string name = std::string(1, letter) + std::to_string(time);
  Summary::Fn fn = [letter, time, name](const History& h) -> SummaryValue {
    const auto s = static_cast<std::size_t>(time);
    switch (letter) {
      case 'X':
        if (s >= h.covariates.size()) break;
        return {h.covariates[s]};
      case 'A':
        if (s >= h.treatments.size()) break;
        return {static_cast<double>(h.treatments[s])};
      default:
        if (s >= h.outcomes.size()) break;
        return {static_cast<double>(h.outcomes[s])};
    }
    throw RangeError("summary " + name + " is not part of H_" + std::to_string(h.time));
  };
  Summary::Labeler label = [name](const SummaryValue& v) { return name + "=" + format_number(v.at(0)); };
  return Summary(name, std::move(fn), std::move(label), false, 1);
}

// Accumulates per-cell mass and endpoint mean while walking the tree.
struct CellAccumulator {
  History representative;
  double mass = 0.0;
  double weighted_y = 0.0;
};

class Enumerator {
 public:
  Enumerator(const Dgp& dgp, const Regime& regime, int endpoint, int condition_time, const Summary& summary,
             bool require_eligible, const OracleOptions& options)
      : dgp_(dgp),
        regime_(regime),
        endpoint_(endpoint),
        condition_time_(condition_time),
        summary_(summary),
        require_eligible_(require_eligible),
        options_(options),
        path_(dgp.horizon()) {}

  std::map<SummaryValue, CellAccumulator> run() {
    step(0, 1.0, nullptr);
    return std::move(cells_);
  }

 private:
  void tick() {
    if (++nodes_ > options_.node_limit) {
      throw EnumerationLimitError("oracle enumeration exceeded " + std::to_string(options_.node_limit) + " nodes");
    }
  }

  void step(int t, double weight, CellAccumulator* cell) {
    tick();
    const auto ti = static_cast<std::size_t>(t);
    const CovariateLaw law = dgp_.covariate_law(path_, t);
    if (const auto* d = std::get_if<DiscreteLaw>(&law)) {
      for (std::size_t i = 0; i < d->values.size(); ++i) {
        if (d->probs[i] <= 0.0) continue;
        path_.covariates[ti] = d->values[i];
        after_covariate(t, weight * d->probs[i], cell);
      }
    } else if (const auto* g = std::get_if<GaussianLaw>(&law)) {
      const QuadratureRule& rule = gauss_hermite_normal(dgp_.quadrature_nodes());
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        path_.covariates[ti] = g->mean + g->sd * rule.nodes[i];
        after_covariate(t, weight * rule.weights[i], cell);
      }
    } else {
      throw NotEnumerableError("DGP '" + dgp_.name() + "' has a sample-only covariate law at t=" + std::to_string(t));
    }
  }

  void after_covariate(int t, double weight, CellAccumulator* cell) {
    const auto ti = static_cast<std::size_t>(t);
    const History h = history_at(path_, t);
    const double p = dgp_.availability_probability(path_, t);
    for (int drawn = 1; drawn >= 0; --drawn) {
      const double pw = drawn == 1 ? p : 1.0 - p;
      if (pw <= 0.0) continue;
      const int avail = options_.eligibility.availability(h, drawn);
      path_.availability[ti] = avail;
      path_.eligibility[ti] = options_.eligibility.trial(h, avail);
      CellAccumulator* here = cell;
      if (t == condition_time_) {
        if (require_eligible_ && path_.eligibility[ti] == 0) continue;
        auto [it, inserted] = cells_.try_emplace(summary_(h));
        if (inserted) it->second.representative = h;
        it->second.mass += weight * pw;
        here = &it->second;
      }
      act(t, h, weight * pw, here);
    }
  }

  void act(int t, const History& h, double weight, CellAccumulator* cell) {
    const auto ti = static_cast<std::size_t>(t);
    const ActionLaw law = regime_.law(h);
    double p1 = law.p_treat;
    if (path_.availability[ti] == 0) {
      if (!law.randomized && p1 > 0.5) {
        throw IdentificationError("regime '" + regime_.name() + "' requests A_" + std::to_string(t) +
                                  "=1 where the subject is unavailable (I*=0) with positive probability");
      }
      p1 = 0.0;
    }
    for (int a = 1; a >= 0; --a) {
      const double pa = a == 1 ? p1 : 1.0 - p1;
      if (pa <= 0.0) continue;
      path_.treatments[ti] = a;
      outcome(t, weight * pa, cell);
    }
  }

  void outcome(int t, double weight, CellAccumulator* cell) {
    const auto ti = static_cast<std::size_t>(t);
    const double py = dgp_.outcome_probability(path_, t);
    if (t == endpoint_) {
      if (cell != nullptr) cell->weighted_y += weight * py;
      return;
    }
    for (int y = 1; y >= 0; --y) {
      const double pw = y == 1 ? py : 1.0 - py;
      if (pw <= 0.0) continue;
      path_.outcomes[ti] = y;
      step(t + 1, weight * pw, cell);
    }
  }

  const Dgp& dgp_;
  const Regime& regime_;
  int endpoint_;
  int condition_time_;
  const Summary& summary_;
  bool require_eligible_;
  const OracleOptions& options_;
  Trajectory path_;
  std::size_t nodes_ = 0;
  std::map<SummaryValue, CellAccumulator> cells_;
};

BlipTable contrast_table(const Dgp& dgp, const Regime& numerator, const Regime& denominator, int t, int delta,
                         int endpoint, const Summary& summary, const OracleOptions& options, Contrast contrast) {
  const auto num = counterfactual_cells(dgp, numerator, endpoint, t, summary, true, options);
  const auto den = counterfactual_cells(dgp, denominator, endpoint, t, summary, true, options);
  if (num.size() != den.size()) throw NumericalError("numerator and denominator cells differ");
  if (num.empty()) {
    throw ValidationError("no eligible histories at t=" + std::to_string(t) + " (P(I_t = 1) = 0)");
  }
  BlipTable table;
  table.contrast = to_string(contrast);
  table.t = t;
  table.delta = delta;
  for (std::size_t i = 0; i < num.size(); ++i) {
    BlipEntry e;
    e.value = num[i].value;
    e.label = summary.label(e.value);
    e.mass = num[i].mass;
    e.numerator_mean = num[i].mean;
    e.denominator_mean = den[i].mean;
    e.representative = num[i].representative;
    if (!(e.numerator_mean > 0.0) || !(e.denominator_mean > 0.0)) {
      throw UndefinedBlipError("blip undefined at t=" + std::to_string(t) + ", delta=" + std::to_string(delta) +
                               ", cell " + e.label + ": numerator mean " + format_number(e.numerator_mean) +
                               ", denominator mean " + format_number(e.denominator_mean));
    }
    e.blip = std::log(e.numerator_mean / e.denominator_mean);
    table.entries.push_back(std::move(e));
  }
  return table;
}

}  // namespace

Regime excursion_regime(const Protocol& protocol, int t, std::vector<int> actions,
                        const std::optional<Regime>& follow) {
  const int next = t + static_cast<int>(actions.size());
  Regime r = Regime::static_path(t, std::move(actions));
  if (t > 0) r = Regime::from_protocol(protocol).followed_by(r);
  if (follow) r = r.followed_by(follow->starting_at(next));
  return r;
}

Summary::Summary(std::string name, Fn fn, Labeler labeler, bool identity, std::optional<std::size_t> width)
    : name_(std::move(name)), fn_(std::move(fn)), labeler_(std::move(labeler)), identity_(identity), width_(width) {
  if (!fn_ || !labeler_) throw ValidationError("summary '" + name_ + "' is missing a function");
}

Summary Summary::empty() {
  return Summary(
      "none", [](const History&) { return SummaryValue{}; }, [](const SummaryValue&) { return std::string("none"); },
      false, 0);
}

Summary Summary::treatment(int time) { return primitive('A', time); }
Summary Summary::covariate(int time) { return primitive('X', time); }
Summary Summary::outcome(int time) { return primitive('Y', time); }

Summary Summary::full_history() {
  Fn fn = [](const History& h) {
    SummaryValue v(h.covariates.begin(), h.covariates.end());
    for (int r : h.availability) v.push_back(r);
    for (int a : h.treatments) v.push_back(a);
    for (int y : h.outcomes) v.push_back(y);
    return v;
  };
  Labeler label = [](const SummaryValue& v) {
    // Layout has 4t + 1 entries at time t.
    const std::size_t t = v.empty() ? 0 : (v.size() - 1) / 4;
    if (v.size() != 4 * t + 1) return std::string("H[") + std::to_string(v.size()) + "]";
    std::vector<std::string> parts;
    for (std::size_t s = 0; s <= t; ++s) parts.push_back("X" + std::to_string(s) + "=" + format_number(v[s]));
    const char* names[] = {"Istar", "A", "Y"};
    for (std::size_t block = 0; block < 3; ++block) {
      for (std::size_t s = 0; s < t; ++s) {
        parts.push_back(names[block] + std::to_string(s) + "=" + format_number(v[t + 1 + block * t + s]));
      }
    }
    return join_label(parts);
  };
  return Summary("H", std::move(fn), std::move(label), true);
}

Summary Summary::combine(const std::vector<Summary>& parts) {
  if (parts.empty()) return empty();
  if (parts.size() == 1) return parts.front();
  std::vector<std::size_t> widths;
  std::string name;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (!p.width()) throw UsageError("summary '" + p.name() + "' has variable width and cannot be combined");
    widths.push_back(*p.width());
    total += *p.width();
    name += (name.empty() ? "" : ",") + p.name();
  }
  Fn fn = [parts](const History& h) {
    SummaryValue v;
    for (const auto& p : parts) {
      const auto part = p(h);
      v.insert(v.end(), part.begin(), part.end());
    }
    return v;
  };
  Labeler label = [parts, widths](const SummaryValue& v) {
    std::vector<std::string> out;
    std::size_t at = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto begin = v.begin() + static_cast<std::ptrdiff_t>(at);
      out.push_back(parts[i].label(SummaryValue(begin, begin + static_cast<std::ptrdiff_t>(widths[i]))));
      at += widths[i];
    }
    return join_label(out);
  };
  return Summary(name, std::move(fn), std::move(label), false, total);
}

Summary Summary::parse(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty() || s == "none") return empty();
  if (s == "H") return full_history();
  std::vector<Summary> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.size() < 2 || (item[0] != 'X' && item[0] != 'A' && item[0] != 'Y') ||
        !std::all_of(item.begin() + 1, item.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw ParseError("bad summary term '" + item + "' (expected none, H, or X<s>/A<s>/Y<s>)");
    }
    parts.push_back(primitive(item[0], static_cast<int>(parse_integer(item.substr(1), "summary time"))));
  }
  return combine(parts);
}

std::vector<MeanCell> counterfactual_cells(const Dgp& dgp, const Regime& regime, int endpoint, int condition_time,
                                           const Summary& summary, bool require_eligible,
                                           const OracleOptions& options) {
  if (endpoint < 0 || endpoint > dgp.horizon()) {
    throw RangeError("endpoint Y_" + std::to_string(endpoint) + " outside horizon " + std::to_string(dgp.horizon()));
  }
  if (condition_time > endpoint) throw RangeError("conditioning time is after the endpoint");
  if (regime.start_time() != 0) throw UsageError("oracle regime must govern from t=0");
  // Unconditional means condition on the empty summary at t = 0, which every path passes.
  const bool unconditional = condition_time < 0;
  const Summary none = Summary::empty();
  Enumerator walker(dgp, regime, endpoint, unconditional ? 0 : condition_time, unconditional ? none : summary,
                    unconditional ? false : require_eligible, options);
  auto acc = walker.run();
  std::vector<MeanCell> out;
  out.reserve(acc.size());
  for (auto& [value, cell] : acc) {
    if (!(cell.mass > 0.0)) continue;
    out.push_back(MeanCell{value, std::move(cell.representative), cell.mass, cell.weighted_y / cell.mass});
  }
  return out;
}

double counterfactual_mean(const Dgp& dgp, const Regime& regime, int endpoint, const std::optional<Condition>& condition,
                           const OracleOptions& options) {
  if (!condition) {
    const auto cells = counterfactual_cells(dgp, regime, endpoint, -1, Summary::empty(), false, options);
    return cells.at(0).mean;
  }
  const auto cells = counterfactual_cells(dgp, regime, endpoint, condition->time, condition->summary,
                                          condition->require_eligible, options);
  for (const auto& c : cells) {
    if (c.value == condition->value) return c.mean;
  }
  throw ValidationError("conditioning event " + condition->summary.label(condition->value) + " at t=" +
                        std::to_string(condition->time) + " has zero probability");
}

const char* to_string(Contrast contrast) {
  switch (contrast) {
    case Contrast::blip_to_zero: return "blip-to-zero";
    case Contrast::continuous_vs_never: return "continuous-vs-never";
    case Contrast::regime_specific: return "regime-specific";
  }
  return "?";
}

EstimandSpec EstimandSpec::at_endpoint(int t, int k, Summary summary, Contrast contrast) {
  if (k < t) throw RangeError("endpoint k=" + std::to_string(k) + " precedes t=" + std::to_string(t));
  EstimandSpec spec;
  spec.t = t;
  spec.delta = k - t + 1;
  spec.summary = std::move(summary);
  spec.contrast = contrast;
  return spec;
}

void EstimandSpec::validate(int horizon) const {
  if (t < 0) throw RangeError("t must be >= 0");
  if (delta < 1) throw RangeError("delta must be >= 1");
  if (endpoint() > horizon) {
    throw RangeError("t + delta = " + std::to_string(t + delta) + " exceeds T + 1 = " + std::to_string(horizon + 1));
  }
  if (contrast == Contrast::regime_specific && !regime) throw UsageError("regime-specific contrast needs a regime g");
}

const BlipEntry& BlipTable::at(const SummaryValue& value) const {
  for (const auto& e : entries) {
    if (e.value == value) return e;
  }
  throw RangeError("no blip entry for that summary value (zero eligible mass)");
}

double BlipTable::marginal() const {
  if (entries.size() != 1 || !entries.front().value.empty()) throw UsageError("blip table is not marginal (S = none)");
  return entries.front().blip;
}

BlipTable excursion_blip(const Dgp& dgp, const Protocol& protocol, const EstimandSpec& spec) {
  spec.validate(dgp.horizon());
  OracleOptions options;
  options.eligibility = spec.eligibility;
  std::vector<int> one(static_cast<std::size_t>(spec.delta), 0);
  std::vector<int> zero = one;
  one[0] = 1;
  return contrast_table(dgp, excursion_regime(protocol, spec.t, one), excursion_regime(protocol, spec.t, zero), spec.t,
                        spec.delta, spec.endpoint(), spec.summary, options, Contrast::blip_to_zero);
}

BlipTable continuous_vs_never_blip(const Dgp& dgp, const Protocol& protocol, const EstimandSpec& spec) {
  spec.validate(dgp.horizon());
  OracleOptions options;
  options.eligibility = spec.eligibility;
  const auto n = static_cast<std::size_t>(spec.delta);
  return contrast_table(dgp, excursion_regime(protocol, spec.t, std::vector<int>(n, 1)),
                        excursion_regime(protocol, spec.t, std::vector<int>(n, 0)), spec.t, spec.delta,
                        spec.endpoint(), spec.summary, options, Contrast::continuous_vs_never);
}

BlipTable regime_blip(const Dgp& dgp, const Protocol& protocol, const Regime& g, int t, int k,
                      const Summary& conditioning, const OracleOptions& options) {
  if (t < 0 || k < t || k > dgp.horizon()) {
    throw RangeError("regime blip needs 0 <= t <= k <= T (t=" + std::to_string(t) + ", k=" + std::to_string(k) + ")");
  }
  std::optional<Regime> follow;
  if (k > t) follow = g;
  return contrast_table(dgp, excursion_regime(protocol, t, {1}, follow), excursion_regime(protocol, t, {0}, follow), t,
                        k - t + 1, k, conditioning, options, Contrast::regime_specific);
}

BlipTable compute_blip(const Dgp& dgp, const Protocol& protocol, const EstimandSpec& spec) {
  switch (spec.contrast) {
    case Contrast::blip_to_zero: return excursion_blip(dgp, protocol, spec);
    case Contrast::continuous_vs_never: return continuous_vs_never_blip(dgp, protocol, spec);
    case Contrast::regime_specific: {
      spec.validate(dgp.horizon());
      OracleOptions options;
      options.eligibility = spec.eligibility;
      return regime_blip(dgp, protocol, *spec.regime, spec.t, spec.endpoint(), spec.summary, options);
    }
  }
  throw UsageError("unknown contrast");
}

double HrMsmSurface::mean(const SummaryValue& value, const std::vector<int>& path) const {
  for (const auto& c : cells) {
    if (c.value == value && c.path == path) return c.mean;
  }
  throw RangeError("no surface cell for that summary value and path");
}

double HrMsmSurface::contrast(const SummaryValue& value, const std::vector<int>& path) const {
  for (const auto& c : cells) {
    if (c.value == value && c.path == path) return c.contrast;
  }
  throw RangeError("no surface cell for that summary value and path");
}

HrMsmSurface hr_msm_surface(const Dgp& dgp, const Protocol& protocol, int t, int delta, const Summary& summary,
                            const OracleOptions& options) {
  if (delta < 0 || delta > kMaxSurfaceDelta) {
    throw EnumerationLimitError("HR-MSM surface needs 0 <= delta <= " + std::to_string(kMaxSurfaceDelta));
  }
  if (t < 0 || t + delta > dgp.horizon()) {
    throw RangeError("HR-MSM surface needs t + delta <= T (t=" + std::to_string(t) + ", delta=" + std::to_string(delta) +
                     ")");
  }
  const int length = delta + 1;
  const std::size_t paths = std::size_t{1} << length;
  HrMsmSurface surface;
  surface.t = t;
  surface.delta = delta;
  std::vector<std::vector<MeanCell>> by_path(paths);
  for (std::size_t code = 0; code < paths; ++code) {
    std::vector<int> path(static_cast<std::size_t>(length));
    for (int j = 0; j < length; ++j) path[static_cast<std::size_t>(j)] = static_cast<int>((code >> (length - 1 - j)) & 1U);
    by_path[code] = counterfactual_cells(dgp, excursion_regime(protocol, t, path), t + delta, t, summary, true, options);
    for (const auto& cell : by_path[code]) {
      HrMsmSurface::Cell c;
      c.value = cell.value;
      c.label = summary.label(cell.value);
      c.path = path;
      c.mean = cell.mean;
      surface.cells.push_back(std::move(c));
    }
  }
  for (auto& c : surface.cells) {
    const double base = surface.mean(c.value, std::vector<int>(static_cast<std::size_t>(length), 0));
    c.contrast = (c.mean > 0.0 && base > 0.0) ? std::log(c.mean / base) : std::numeric_limits<double>::quiet_NaN();
  }
  return surface;
}

void write_blip_csv(std::ostream& out, std::span<const BlipTable> tables) {
  out << "contrast,t,delta,summary_value,value\n";
  for (const auto& table : tables) {
    for (const auto& e : table.entries) {
      out << table.contrast << ',' << table.t << ',' << table.delta << ',' << e.label << ',' << format_number(e.blip)
          << '\n';
    }
  }
}

}  // namespace excursion
