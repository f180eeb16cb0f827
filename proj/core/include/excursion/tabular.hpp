#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "excursion/dgp.hpp"
#include "excursion/protocol.hpp"

namespace excursion {

/// Finite-state DGP given as probability tables.
///
/// Text grammar (one statement per line, `#` starts a comment):
///
///     horizon = 2
///     absorbing = false                 # optional
///     [covariate 1]
///     support = 0, 1
///     history = *; prob = 0.5, 0.5
///     [availability 0]
///     history = *; prob = 0
///     [outcome 2]
///     history = A1=1, A2=1; prob = 0.6795704571147613
///     history = *; prob = 0.25
///     [protocol 1]                      # optional
///     history = X1=1; prob = 0.7
///
/// Variables are X<t>, A<t>, Y<t> and Istar<t> (availability). A row applies
/// to the first listed history pattern that matches; `*` matches anything.
/// Covariate rows list one probability per support value and must sum to 1
/// within 1e-9; the other sections give P(variable = 1). Missing sections
/// default to X_t = 0, I*_t = 1, Y_t = 0 and no protocol.
///
/// Patterns may only mention variables that precede the law in time:
/// covariate t sees times < t; availability t and protocol t add X_t;
/// outcome t adds X_t, Istar_t and A_t.
struct TabularSpec {
  enum class Variable : char { covariate = 'X', availability = 'R', treatment = 'A', outcome = 'Y' };
  struct Match {
    Variable variable;
    int time;
    double value;
  };
  struct Row {
    std::vector<Match> pattern;  // empty = `*`
    std::vector<double> probs;
  };
  using Section = std::vector<Row>;

  int horizon = 0;
  bool absorbing = false;
  std::map<int, std::vector<double>> supports;
  std::map<int, Section> covariate;
  std::map<int, Section> availability;
  std::map<int, Section> outcome;
  std::map<int, Section> protocol;
};

TabularSpec parse_tabular_spec(std::istream& in);
TabularSpec parse_tabular_spec(const std::string& text);
std::string to_config_text(const TabularSpec& spec);

/// Probability ranges, row sums, time ordering of references, and
/// completeness of every declared section over all histories.
void validate_tabular_spec(const TabularSpec& spec);

struct TabularModel {
  TabularSpec spec;
  Dgp dgp;
  std::optional<Protocol> protocol;
};

/// Validates, then builds the DGP (and protocol if declared).
TabularModel make_tabular_model(const TabularSpec& spec, const std::string& name = "tabular");
Dgp load_tabular_dgp(const std::string& text);
TabularModel load_tabular_model_file(const std::string& path);

/// Random finite DGPs for property batteries: binary covariates and small
/// dependency sets. With `null_effect`, outcomes depend only on X_0 and the
/// previous outcome, so no treatment regime has any effect on any Y_k, while
/// covariates and availability may still depend on past treatment.
struct RandomTabularOptions {
  int horizon = 2;
  bool null_effect = false;
  bool random_availability = false;
  bool with_protocol = true;
};
TabularSpec random_tabular_spec(std::uint64_t seed, const RandomTabularOptions& options);

}  // namespace excursion
