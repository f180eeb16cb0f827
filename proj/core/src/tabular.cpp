#include "excursion/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"

namespace excursion {

namespace {

using Variable = TabularSpec::Variable;
using Section = TabularSpec::Section;

enum class SectionKind { covariate, availability, protocol, outcome };

const char* section_name(SectionKind kind) {
  switch (kind) {
    case SectionKind::covariate: return "covariate";
    case SectionKind::availability: return "availability";
    case SectionKind::protocol: return "protocol";
    case SectionKind::outcome: return "outcome";
  }
  return "?";
}

std::string variable_name(Variable v, int time) {
  switch (v) {
    case Variable::covariate: return "X" + std::to_string(time);
    case Variable::availability: return "Istar" + std::to_string(time);
    case Variable::treatment: return "A" + std::to_string(time);
    case Variable::outcome: return "Y" + std::to_string(time);
  }
  return "?";
}

// Whether a law of `kind` at time t may condition on variable v at `time`.
bool visible(SectionKind kind, int t, Variable v, int time) {
  if (time < t) return true;
  if (time > t) return false;
  switch (kind) {
    case SectionKind::covariate: return false;
    case SectionKind::availability: return v == Variable::covariate;
    case SectionKind::protocol: return v == Variable::covariate;
    case SectionKind::outcome: return v != Variable::outcome;
  }
  return false;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::pair<std::string, std::string> key_value(const std::string& text, int line_no) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) {
    throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + text + "'");
  }
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

TabularSpec::Match parse_match(const std::string& text, int line_no) {
  const auto [lhs, rhs] = key_value(text, line_no);
  TabularSpec::Match m{};
  std::string digits;
  if (lhs.rfind("Istar", 0) == 0) {
    m.variable = Variable::availability;
    digits = lhs.substr(5);
  } else if (!lhs.empty() && (lhs[0] == 'X' || lhs[0] == 'A' || lhs[0] == 'Y')) {
    m.variable = static_cast<Variable>(lhs[0]);
    digits = lhs.substr(1);
  } else {
    throw ParseError("line " + std::to_string(line_no) + ": unknown variable '" + lhs + "'");
  }
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ParseError("line " + std::to_string(line_no) + ": bad variable time in '" + lhs + "'");
  }
  m.time = static_cast<int>(parse_integer(digits, "variable time"));
  m.value = parse_double(rhs, "pattern value");
  return m;
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_double(item, what));
  return out;
}

// Values of the variables a pattern can reference, read from a path or a history.
struct PathSource {
  const Trajectory& path;
  double value(Variable v, int time) const {
    const auto i = static_cast<std::size_t>(time);
    switch (v) {
      case Variable::covariate: return path.covariates[i];
      case Variable::availability: return path.availability[i];
      case Variable::treatment: return path.treatments[i];
      case Variable::outcome: return path.outcomes[i];
    }
    return 0.0;
  }
};

struct HistorySource {
  const History& h;
  double value(Variable v, int time) const {
    const auto i = static_cast<std::size_t>(time);
    switch (v) {
      case Variable::covariate: return h.covariates.at(i);
      case Variable::availability: return h.availability.at(i);
      case Variable::treatment: return h.treatments.at(i);
      case Variable::outcome: return h.outcomes.at(i);
    }
    return 0.0;
  }
};

template <typename Source>
const TabularSpec::Row* find_row(const Section& section, const Source& src) {
  for (const auto& row : section) {
    bool ok = true;
    for (const auto& m : row.pattern) {
      if (src.value(m.variable, m.time) != m.value) {
        ok = false;
        break;
      }
    }
    if (ok) return &row;
  }
  return nullptr;
}

template <typename Source>
const TabularSpec::Row& lookup(const Section& section, const Source& src, SectionKind kind, int t) {
  const auto* row = find_row(section, src);
  if (row == nullptr) {
    throw IncompleteTableError(std::string("no row of [") + section_name(kind) + " " + std::to_string(t) +
                               "] matches the history");
  }
  return *row;
}

const std::map<int, Section>& sections_of(const TabularSpec& spec, SectionKind kind) {
  switch (kind) {
    case SectionKind::covariate: return spec.covariate;
    case SectionKind::availability: return spec.availability;
    case SectionKind::protocol: return spec.protocol;
    case SectionKind::outcome: return spec.outcome;
  }
  return spec.outcome;
}

std::map<int, Section>& sections_mut(TabularSpec& spec, SectionKind kind) {
  return const_cast<std::map<int, Section>&>(sections_of(spec, kind));
}

std::vector<double> support_of(const TabularSpec& spec, int t) {
  auto it = spec.supports.find(t);
  return it == spec.supports.end() ? std::vector<double>{0.0} : it->second;
}

void check_rows(const TabularSpec& spec, SectionKind kind, int t, const Section& section) {
  const std::string where = std::string("[") + section_name(kind) + " " + std::to_string(t) + "]";
  if (t < 0 || t > spec.horizon) throw ValidationError(where + " is outside horizon " + std::to_string(spec.horizon));
  if (section.empty()) throw IncompleteTableError(where + " has no rows");
  for (const auto& row : section) {
    std::set<std::pair<char, int>> seen;
    for (const auto& m : row.pattern) {
      const std::string var = variable_name(m.variable, m.time);
      if (m.time < 0 || m.time > spec.horizon) throw ValidationError(where + ": " + var + " is outside the horizon");
      if (!visible(kind, t, m.variable, m.time)) throw ValidationError(where + " cannot condition on " + var);
      if (!seen.insert({static_cast<char>(m.variable), m.time}).second) {
        throw ValidationError(where + " mentions " + var + " twice in one pattern");
      }
      if (m.variable == Variable::covariate) {
        const auto sup = support_of(spec, m.time);
        if (std::find(sup.begin(), sup.end(), m.value) == sup.end()) {
          throw ValidationError(where + ": " + var + "=" + format_exact(m.value) + " is not in its support");
        }
      } else if (m.value != 0.0 && m.value != 1.0) {
        throw ValidationError(where + ": " + var + " is binary");
      }
    }
    for (double p : row.probs) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(where + ": probability " + format_exact(p) + " outside [0,1]");
    }
    if (kind == SectionKind::covariate) {
      const auto sup = support_of(spec, t);
      if (row.probs.size() != sup.size()) {
        throw ValidationError(where + ": row has " + std::to_string(row.probs.size()) + " probabilities for " +
                              std::to_string(sup.size()) + " support values");
      }
      const double total = std::accumulate(row.probs.begin(), row.probs.end(), 0.0);
      if (std::abs(total - 1.0) > 1e-9) {
        throw ProbabilitySumError(where + ": probabilities sum to " + format_number(total) + ", not 1");
      }
    } else if (row.probs.size() != 1) {
      throw ValidationError(where + ": expected a single probability P(=1)");
    }
  }
}

// Walks every assignment of (X_t, I*_t, A_t, Y_t), t = 0..T, over the declared
// supports and checks that each declared section has a matching row wherever
// it is consulted. A_t = 1 is skipped when I*_t = 0 (unreachable).
class CompletenessWalker {
 public:
  explicit CompletenessWalker(const TabularSpec& spec) : spec_(spec), path_(spec.horizon) {}

  void run() { step(0); }

 private:
  void check(SectionKind kind, int t) {
    const auto& secs = sections_of(spec_, kind);
    auto it = secs.find(t);
    if (it != secs.end()) lookup(it->second, PathSource{path_}, kind, t);
  }

  void step(int t) {
    if (t > spec_.horizon) return;
    const auto i = static_cast<std::size_t>(t);
    check(SectionKind::covariate, t);
    for (double x : support_of(spec_, t)) {
      path_.covariates[i] = x;
      check(SectionKind::availability, t);
      check(SectionKind::protocol, t);
      for (int r = 0; r <= 1; ++r) {
        path_.availability[i] = r;
        for (int a = 0; a <= r; ++a) {
          path_.treatments[i] = a;
          check(SectionKind::outcome, t);
          for (int y = 0; y <= 1; ++y) {
            path_.outcomes[i] = y;
            step(t + 1);
          }
        }
      }
    }
  }

  const TabularSpec& spec_;
  Trajectory path_;
};

double walk_size(const TabularSpec& spec) {
  double nodes = 1.0;
  for (int t = 0; t <= spec.horizon; ++t) nodes *= 6.0 * static_cast<double>(support_of(spec, t).size());
  return nodes;
}

void write_section(std::ostream& out, const char* name, int t, const Section& section,
                   const std::vector<double>* support) {
  out << "\n[" << name << ' ' << t << "]\n";
  if (support != nullptr) {
    out << "support = ";
    for (std::size_t i = 0; i < support->size(); ++i) out << (i ? ", " : "") << format_exact((*support)[i]);
    out << '\n';
  }
  for (const auto& row : section) {
    out << "history = ";
    if (row.pattern.empty()) out << '*';
    for (std::size_t i = 0; i < row.pattern.size(); ++i) {
      const auto& m = row.pattern[i];
      out << (i ? ", " : "") << variable_name(m.variable, m.time) << '=' << format_exact(m.value);
    }
    out << "; prob = ";
    for (std::size_t i = 0; i < row.probs.size(); ++i) out << (i ? ", " : "") << format_exact(row.probs[i]);
    out << '\n';
  }
}

}  // namespace

TabularSpec parse_tabular_spec(std::istream& in) {
  TabularSpec spec;
  bool have_horizon = false;
  std::optional<SectionKind> kind;
  int section_time = 0;
  std::string line;
  int line_no = 0;
  std::set<std::pair<int, int>> declared;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(at + "unterminated section header");
      const auto parts = split(trim(line.substr(1, line.size() - 2)), ' ');
      std::vector<std::string> words;
      for (const auto& p : parts) {
        if (!p.empty()) words.push_back(p);
      }
      if (words.size() != 2) throw ParseError(at + "section header must be '[kind t]'");
      if (words[0] == "covariate") kind = SectionKind::covariate;
      else if (words[0] == "availability") kind = SectionKind::availability;
      else if (words[0] == "outcome") kind = SectionKind::outcome;
      else if (words[0] == "protocol") kind = SectionKind::protocol;
      else throw ParseError(at + "unknown section '" + words[0] + "'");
      section_time = static_cast<int>(parse_integer(words[1], "section time"));
      if (!declared.insert({static_cast<int>(*kind), section_time}).second) {
        throw ParseError(at + "duplicate section [" + words[0] + " " + words[1] + "]");
      }
      auto& secs = sections_mut(spec, *kind);
      secs[section_time];
      continue;
    }
    if (!kind) {
      const auto [key, value] = key_value(line, line_no);
      if (key == "horizon") {
        spec.horizon = static_cast<int>(parse_integer(value, "horizon"));
        have_horizon = true;
      } else if (key == "absorbing") {
        if (value != "true" && value != "false") throw ParseError(at + "absorbing must be true or false");
        spec.absorbing = value == "true";
      } else {
        throw ParseError(at + "unknown setting '" + key + "'");
      }
      continue;
    }
    if (line.find(';') == std::string::npos) {
      const auto [key, value] = key_value(line, line_no);
      if (key != "support") throw ParseError(at + "expected 'support = ...' or 'history = ...; prob = ...'");
      if (*kind != SectionKind::covariate) throw ParseError(at + "support is only valid in covariate sections");
      spec.supports[section_time] = parse_list(value, "support value");
      continue;
    }
    const auto parts = split(line, ';');
    if (parts.size() != 2) throw ParseError(at + "expected 'history = ...; prob = ...'");
    const auto [hkey, hvalue] = key_value(parts[0], line_no);
    const auto [pkey, pvalue] = key_value(parts[1], line_no);
    if (hkey != "history" || pkey != "prob") throw ParseError(at + "expected 'history = ...; prob = ...'");
    TabularSpec::Row row;
    if (hvalue != "*") {
      for (const auto& item : split(hvalue, ',')) row.pattern.push_back(parse_match(item, line_no));
    }
    row.probs = parse_list(pvalue, "probability");
    auto& secs = sections_mut(spec, *kind);
    secs[section_time].push_back(std::move(row));
  }
  if (!have_horizon) throw ParseError("missing 'horizon = T'");
  return spec;
}

TabularSpec parse_tabular_spec(const std::string& text) {
  std::istringstream in(text);
  return parse_tabular_spec(in);
}

std::string to_config_text(const TabularSpec& spec) {
  std::ostringstream out;
  out << "horizon = " << spec.horizon << '\n';
  out << "absorbing = " << (spec.absorbing ? "true" : "false") << '\n';
  for (const auto& [t, sec] : spec.covariate) {
    const auto sup = support_of(spec, t);
    write_section(out, "covariate", t, sec, &sup);
  }
  for (const auto& [t, sec] : spec.availability) write_section(out, "availability", t, sec, nullptr);
  for (const auto& [t, sec] : spec.protocol) write_section(out, "protocol", t, sec, nullptr);
  for (const auto& [t, sec] : spec.outcome) write_section(out, "outcome", t, sec, nullptr);
  return out.str();
}

void validate_tabular_spec(const TabularSpec& spec) {
  if (spec.horizon < 0) throw ValidationError("horizon must be >= 0");
  for (const auto& [t, sup] : spec.supports) {
    if (!spec.covariate.count(t)) throw IncompleteTableError("support declared for X" + std::to_string(t) + " without rows");
    std::set<double> distinct(sup.begin(), sup.end());
    if (sup.empty() || distinct.size() != sup.size()) throw ValidationError("support of X" + std::to_string(t) + " must be non-empty and distinct");
  }
  for (const auto& [t, sec] : spec.covariate) {
    if (!spec.supports.count(t)) throw ValidationError("[covariate " + std::to_string(t) + "] needs a support line");
    check_rows(spec, SectionKind::covariate, t, sec);
  }
  for (const auto& [t, sec] : spec.availability) check_rows(spec, SectionKind::availability, t, sec);
  for (const auto& [t, sec] : spec.protocol) check_rows(spec, SectionKind::protocol, t, sec);
  for (const auto& [t, sec] : spec.outcome) check_rows(spec, SectionKind::outcome, t, sec);
  // Larger specs are still checked lazily: a missing row throws when consulted.
  if (walk_size(spec) <= 4e6) CompletenessWalker(spec).run();
}

TabularModel make_tabular_model(const TabularSpec& spec, const std::string& name) {
  validate_tabular_spec(spec);
  auto shared = std::make_shared<const TabularSpec>(spec);
  Dgp::Laws laws;
  laws.covariate = [shared](const Trajectory& path, int t) -> CovariateLaw {
    auto it = shared->covariate.find(t);
    if (it == shared->covariate.end()) return point_mass(0.0);
    const auto& row = lookup(it->second, PathSource{path}, SectionKind::covariate, t);
    return DiscreteLaw{shared->supports.at(t), row.probs};
  };
  laws.availability = [shared](const Trajectory& path, int t) {
    auto it = shared->availability.find(t);
    if (it == shared->availability.end()) return 1.0;
    return lookup(it->second, PathSource{path}, SectionKind::availability, t).probs[0];
  };
  laws.outcome = [shared](const Trajectory& path, int t) {
    auto it = shared->outcome.find(t);
    if (it == shared->outcome.end()) return 0.0;
    return lookup(it->second, PathSource{path}, SectionKind::outcome, t).probs[0];
  };
  std::optional<Protocol> protocol;
  if (!spec.protocol.empty()) {
    for (int t = 0; t <= spec.horizon; ++t) {
      if (!spec.protocol.count(t)) {
        throw IncompleteTableError("protocol sections must cover every t; [protocol " + std::to_string(t) + "] is missing");
      }
    }
    protocol.emplace(
        spec.horizon,
        [shared](const History& h) {
          return lookup(shared->protocol.at(h.time), HistorySource{h}, SectionKind::protocol, h.time).probs[0];
        },
        name + " protocol");
  }
  return TabularModel{spec, Dgp(name, spec.horizon, std::move(laws), spec.absorbing), std::move(protocol)};
}

Dgp load_tabular_dgp(const std::string& text) { return make_tabular_model(parse_tabular_spec(text)).dgp; }

TabularModel load_tabular_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open DGP config '" + path + "'");
  return make_tabular_model(parse_tabular_spec(in), path);
}

TabularSpec random_tabular_spec(std::uint64_t seed, const RandomTabularOptions& options) {
  if (options.horizon < 0 || options.horizon > 6) throw RangeError("random tabular horizon must be in [0, 6]");
  CounterStream rng(seed, 0x7ab1e, 0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  using M = TabularSpec::Match;

  TabularSpec spec;
  spec.horizon = options.horizon;
  for (int t = 0; t <= options.horizon; ++t) {
    spec.supports[t] = {0.0, 1.0};
    auto& cov = spec.covariate[t];
    if (t == 0) {
      const double p = uniform(0.2, 0.8);
      cov.push_back({{}, {1.0 - p, p}});
    } else {
      for (int x = 0; x <= 1; ++x) {
        for (int a = 0; a <= 1; ++a) {
          const double p = uniform(0.1, 0.9);
          cov.push_back({{M{Variable::covariate, t - 1, double(x)}, M{Variable::treatment, t - 1, double(a)}},
                         {1.0 - p, p}});
        }
      }
    }
    if (options.random_availability && t > 0) {
      auto& av = spec.availability[t];
      av.push_back({{M{Variable::covariate, t, 1.0}}, {uniform(0.5, 0.95)}});
      av.push_back({{}, {1.0}});
    }
    if (options.with_protocol) {
      auto& pr = spec.protocol[t];
      for (int x = 0; x <= 1; ++x) {
        if (t == 0) {
          pr.push_back({{M{Variable::covariate, t, double(x)}}, {uniform(0.2, 0.8)}});
          continue;
        }
        for (int a = 0; a <= 1; ++a) {
          pr.push_back({{M{Variable::covariate, t, double(x)}, M{Variable::treatment, t - 1, double(a)}},
                        {uniform(0.2, 0.8)}});
        }
      }
    }
    auto& out = spec.outcome[t];
    if (options.null_effect) {
      for (int x0 = 0; x0 <= 1; ++x0) {
        if (t == 0) {
          out.push_back({{M{Variable::covariate, 0, double(x0)}}, {uniform(0.05, 0.6)}});
          continue;
        }
        for (int y = 0; y <= 1; ++y) {
          out.push_back({{M{Variable::covariate, 0, double(x0)}, M{Variable::outcome, t - 1, double(y)}},
                         {uniform(0.05, 0.6)}});
        }
      }
    } else {
      for (int x = 0; x <= 1; ++x) {
        for (int a = 0; a <= 1; ++a) {
          if (t == 0) {
            out.push_back({{M{Variable::covariate, t, double(x)}, M{Variable::treatment, t, double(a)}},
                           {uniform(0.05, 0.6)}});
            continue;
          }
          for (int prev = 0; prev <= 1; ++prev) {
            out.push_back({{M{Variable::covariate, t, double(x)}, M{Variable::treatment, t, double(a)},
                            M{Variable::treatment, t - 1, double(prev)}},
                           {uniform(0.05, 0.6)}});
          }
        }
      }
    }
  }
  return spec;
}

}  // namespace excursion
