#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "excursion/batteries.hpp"
#include "excursion/dgp_zoo.hpp"
#include "excursion/errors.hpp"
#include "excursion/estimator.hpp"
#include "excursion/format.hpp"
#include "excursion/oracle.hpp"
#include "excursion/parallel.hpp"
#include "excursion/properties.hpp"
#include "excursion/rng.hpp"
#include "excursion/simulate.hpp"
#include "excursion/tabular.hpp"

namespace excursion::cli {

namespace {

constexpr int kBuiltinHorizon = 2;

struct RunConfig {
  std::string command;
  std::string dgp = "two-step";
  std::string theta;
  int delta = 1;
  std::optional<int> t;
  std::string summary = "none";
  long long n = 20000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
  std::string config;
  std::string propensities = "known";
  std::string x2 = "-2,-1.5,-1,-0.5,0,0.5,1,1.5,2";
  std::string suite = "all";
};

// Effective settings echoed as the leading comment block.
using Echo = std::vector<std::pair<std::string, std::string>>;

void write_header(std::ostream& out, const RunConfig& cfg, const Echo& echo) {
  out << "# excursion " << cfg.command << '\n';
  for (const auto& [key, value] : echo) out << "# " << key << '=' << value << '\n';
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> values;
  if (trim(text).empty()) return values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(parse_double(item, what));
  if (!text.empty() && text.back() == ',') throw ParseError(std::string("trailing comma in ") + what + " list");
  return values;
}

std::string join(const std::vector<double>& values) {
  std::string s;
  for (double v : values) s += (s.empty() ? "" : ",") + format_number(v);
  return s;
}

double check_probability(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ValidationError("theta=" + format_number(theta) + " is not a probability in [0, 1]");
  }
  return theta;
}

double single_theta(const RunConfig& cfg) {
  const auto values = parse_list(cfg.theta.empty() ? "0.5" : cfg.theta, "theta");
  if (values.size() != 1) throw UsageError("--theta takes a single value for " + cfg.command);
  return check_probability(values.front());
}

bool builtin(const RunConfig& cfg) { return cfg.dgp == "two-step" || cfg.dgp == "effect-modifier"; }

struct Scenario {
  std::optional<Dgp> dgp;
  std::optional<Protocol> protocol;
  int horizon = kBuiltinHorizon;
};

Scenario load_scenario(const RunConfig& cfg, Echo& echo) {
  echo.emplace_back("dgp", cfg.dgp);
  Scenario s;
  if (builtin(cfg)) {
    if (!cfg.config.empty()) throw UsageError("--config applies to --dgp tabular or csv");
    const double theta = single_theta(cfg);
    echo.emplace_back("theta", format_number(theta));
    if (cfg.dgp == "two-step") {
      const TwoStepParams p{theta};
      s.dgp = two_step_dgp(p);
      s.protocol = two_step_protocol(p);
    } else {
      EffectModifierParams p;
      p.theta = theta;
      s.dgp = effect_modifier_dgp(p);
      s.protocol = effect_modifier_protocol(p);
      echo.emplace_back("alpha0", format_number(p.alpha0));
      echo.emplace_back("alpha1", format_number(p.alpha1));
    }
    return s;
  }
  if (cfg.dgp != "tabular" && cfg.dgp != "csv") {
    throw UsageError("unknown --dgp '" + cfg.dgp + "' (two-step, effect-modifier, tabular, csv)");
  }
  if (!cfg.theta.empty()) throw UsageError("--theta applies to the built-in DGPs only");
  if (cfg.config.empty()) throw UsageError("--dgp " + cfg.dgp + " needs --config <path>");
  echo.emplace_back("config", cfg.config);
  if (cfg.dgp == "tabular") {
    TabularModel model = load_tabular_model_file(cfg.config);
    s.horizon = model.spec.horizon;
    s.dgp = std::move(model.dgp);
    s.protocol = std::move(model.protocol);
  }
  return s;
}

const Protocol& require_protocol(const Scenario& s, const std::string& why) {
  if (!s.protocol) throw UsageError("the DGP config declares no protocol sections, needed " + why);
  return *s.protocol;
}

// Built-ins default to the last trial that reaches the endpoint, tabular configs to t = 0.
int default_time(const RunConfig& cfg, const Scenario& s) {
  if (cfg.t) return *cfg.t;
  return builtin(cfg) ? s.horizon - cfg.delta + 1 : 0;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  Echo echo;
  if (cfg.dgp == "csv") throw UsageError("simulate needs a generative DGP, not --dgp csv");
  const Scenario s = load_scenario(cfg, echo);
  const Protocol& protocol = require_protocol(s, "to simulate");
  echo.emplace_back("n", std::to_string(cfg.n));
  echo.emplace_back("seed", std::to_string(cfg.seed));
  const Dataset data =
      simulate_sre(*s.dgp, protocol, EligibilitySpec::all_eligible(), cfg.n, cfg.seed, {cfg.threads});
  write_header(out, cfg, echo);
  write_dataset_csv(out, data);
  return kSuccess;
}

int cmd_oracle(const RunConfig& cfg, std::ostream& out) {
  Echo echo;
  if (cfg.dgp == "csv") throw UsageError("oracle needs a DGP, not --dgp csv");
  const Scenario s = load_scenario(cfg, echo);
  const Protocol& protocol = require_protocol(s, "for the assignment of past treatments");
  EstimandSpec spec;
  spec.t = default_time(cfg, s);
  spec.delta = cfg.delta;
  spec.summary = Summary::parse(cfg.summary);
  echo.emplace_back("t", std::to_string(spec.t));
  echo.emplace_back("delta", std::to_string(spec.delta));
  echo.emplace_back("summary", spec.summary.name());
  spec.validate(s.horizon);

  std::vector<BlipTable> tables{excursion_blip(*s.dgp, protocol, spec)};
  std::string note;
  if (cfg.delta > 1) {
    try {
      tables.push_back(continuous_vs_never_blip(*s.dgp, protocol, spec));
    } catch (const IdentificationError& e) {
      note = std::string("continuous-vs-never not identified: ") + e.what();
    }
  }
  write_header(out, cfg, echo);
  if (!note.empty()) out << "# " << note << '\n';
  write_blip_csv(out, tables);
  return kSuccess;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
  Echo echo;
  const Scenario s = load_scenario(cfg, echo);
  const PropensityMode mode = parse_propensity_mode(cfg.propensities);
  std::shared_ptr<const Dataset> data;
  if (cfg.dgp == "csv") {
    if (mode == PropensityMode::known) {
      throw UsageError("--dgp csv has no known protocol; use --propensities estimated");
    }
    std::ifstream in(cfg.config);
    if (!in) throw ValidationError("cannot open dataset '" + cfg.config + "'");
    data = std::make_shared<const Dataset>(read_dataset_csv(in));
  } else {
    require_protocol(s, "to simulate");
    echo.emplace_back("n", std::to_string(cfg.n));
    echo.emplace_back("seed", std::to_string(cfg.seed));
    data = std::make_shared<const Dataset>(
        simulate_sre(*s.dgp, *s.protocol, EligibilitySpec::all_eligible(), cfg.n, cfg.seed, {cfg.threads}));
  }
  EmulationOptions options;
  options.mode = mode;
  // Pooling is the default only for configs; the built-in trials before t = 2 have Y ≡ 0.
  if (cfg.t || builtin(cfg)) options.enrollment_time = default_time(cfg, s);
  const Summary summary = Summary::parse(cfg.summary);
  echo.emplace_back("t", options.enrollment_time ? std::to_string(*options.enrollment_time) : "pooled");
  echo.emplace_back("delta", std::to_string(cfg.delta));
  echo.emplace_back("summary", summary.name());
  echo.emplace_back("propensities", to_string(mode));
  const EstimationResult result = emulate_series(data, EligibilitySpec::all_eligible(), cfg.delta, summary,
                                                 s.protocol ? &*s.protocol : nullptr, options);
  write_header(out, cfg, echo);
  write_estimation_csv(out, result);
  return kSuccess;
}

std::vector<double> default_theta_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.05 + 0.045 * i);
  return grid;
}

int cmd_sweep_theta(const RunConfig& cfg, std::ostream& out) {
  const std::vector<double> grid = cfg.theta.empty() ? default_theta_grid() : parse_list(cfg.theta, "theta");
  if (grid.empty()) throw ValidationError("theta grid is empty");
  for (double theta : grid) check_probability(theta);
  const PropensityMode mode = parse_propensity_mode(cfg.propensities);

  struct Row {
    double closed = 0.0, oracle = 0.0, hat = std::nan(""), se = std::nan("");
  };
  std::vector<Row> rows(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
    const TwoStepParams p{grid[i]};
    const Dgp dgp = two_step_dgp(p);
    const Protocol protocol = two_step_protocol(p);
    Row& row = rows[i];
    row.closed = two_step_closed_form_beta(p.theta);
    EstimandSpec spec;
    spec.t = kBuiltinHorizon;
    row.oracle = excursion_blip(dgp, protocol, spec).marginal();
    // Both arms of the trial at t = 2 must be populated.
    if (p.theta <= 0.0 || p.theta >= 1.0) return;
    const auto data = std::make_shared<const Dataset>(
        simulate_sre(dgp, protocol, EligibilitySpec::all_eligible(), cfg.n, derive_seed(cfg.seed, i)));
    EmulationOptions options;
    options.mode = mode;
    options.enrollment_time = kBuiltinHorizon;
    const auto result = emulate_series(data, EligibilitySpec::all_eligible(), 1, Summary::empty(), &protocol, options);
    row.hat = result.beta_hat[0];
    row.se = result.beta_se(0);
  });

  double worst = 0.0;
  std::string bracket = "none in grid";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    worst = std::max(worst, std::abs(rows[i].closed - rows[i].oracle));
    if (bracket != "none in grid") continue;
    if (std::abs(rows[i].closed) <= 1e-12) {
      bracket = "[" + format_number(grid[i]) + "," + format_number(grid[i]) + "]";
    } else if (i + 1 < grid.size() && rows[i].closed * rows[i + 1].closed < 0.0) {
      bracket = "[" + format_number(grid[i]) + "," + format_number(grid[i + 1]) + "]";
    }
  }
  Echo echo{{"dgp", "two-step"},
            {"theta", join(grid)},
            {"t", "2"},
            {"delta", "1"},
            {"summary", "none"},
            {"n", std::to_string(cfg.n)},
            {"seed", std::to_string(cfg.seed)},
            {"propensities", to_string(mode)}};
  write_header(out, cfg, echo);
  out << "# root_bracket=" << bracket << " (sign change of beta at 1/(1+e)=" << format_number(1.0 / (1.0 + std::exp(1.0)))
      << ")\n";
  out << "# max_abs_closed_form_minus_oracle=" << format_number(worst) << '\n';
  out << "theta,beta_closed_form,beta_oracle,beta_hat,se\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << format_number(grid[i]) << ',' << format_number(rows[i].closed) << ',' << format_number(rows[i].oracle) << ','
        << format_number(rows[i].hat) << ',' << format_number(rows[i].se) << '\n';
  }
  return kSuccess;
}

int cmd_sweep_modifier(const RunConfig& cfg, std::ostream& out) {
  const std::vector<double> thetas = parse_list(cfg.theta.empty() ? "0.05,0.5,0.95" : cfg.theta, "theta");
  if (thetas.empty()) throw ValidationError("theta list is empty");
  for (double theta : thetas) check_probability(theta);
  const std::vector<double> x2 = parse_list(cfg.x2, "x2");
  if (x2.empty()) throw ValidationError("x2 grid is empty");
  for (double x : x2) {
    if (!std::isfinite(x)) throw ValidationError("x2 grid values must be finite");
  }
  const EffectModifierParams defaults;
  Echo echo{{"dgp", "effect-modifier"},
            {"theta", join(thetas)},
            {"x2", join(x2)},
            {"alpha0", format_number(defaults.alpha0)},
            {"alpha1", format_number(defaults.alpha1)}};
  write_header(out, cfg, echo);
  out << "theta,x2,beta,slope_at_zero\n";
  for (double theta : thetas) {
    EffectModifierParams p;
    p.theta = theta;
    p.validate();
    const double slope = secondary_excursion_slope(0.0, p);
    for (double x : x2) {
      out << format_number(theta) << ',' << format_number(x) << ',' << format_number(secondary_excursion_beta(x, p))
          << ',' << format_number(slope) << '\n';
    }
  }
  return kSuccess;
}

std::string quote(const std::string& text) {
  std::string s = "\"";
  for (char c : text) {
    if (c == '"') s += '"';
    s += c;
  }
  return s + "\"";
}

const char* status(const BatteryCase& c) {
  if (c.expected_failure) return c.passed ? "XPASS" : "XFAIL";
  return c.passed ? "PASS" : "FAIL";
}

int cmd_check(const RunConfig& cfg, std::ostream& out) {
  const std::vector<std::string> suites{"null-preservation", "weighted-average", "variation-independence"};
  if (cfg.suite != "all" && std::find(suites.begin(), suites.end(), cfg.suite) == suites.end()) {
    throw UsageError("unknown suite '" + cfg.suite + "' (all, null-preservation, weighted-average, variation-independence)");
  }
  const auto wanted = [&](const std::string& s) { return cfg.suite == "all" || cfg.suite == s; };

  BatteryReport report;
  std::vector<std::string> load_errors;
  if (!cfg.config.empty()) {
    // A user config joins the weighted-average battery; a broken one is reported and skipped.
    try {
      const TabularModel model = load_tabular_model_file(cfg.config);
      if (!model.protocol) throw ValidationError("config declares no protocol sections");
      if (wanted("weighted-average")) {
        const auto r = check_weighted_average(model.dgp, *model.protocol, Regime::constant(0, 0), 0,
                                              model.spec.horizon, Summary::empty(), 1e-9);
        report.cases.push_back({"weighted-average", cfg.config, r.passed, false, r.summary()});
      }
    } catch (const Error& e) {
      load_errors.push_back(e.what());
    }
  }
  if (wanted("null-preservation")) report.append(null_preservation_battery(cfg.seed));
  if (wanted("weighted-average")) report.append(weighted_average_battery(cfg.seed));
  if (wanted("variation-independence")) report.append(variation_independence_battery(cfg.seed));

  Echo echo{{"suite", cfg.suite}, {"seed", std::to_string(cfg.seed)}};
  if (!cfg.config.empty()) echo.emplace_back("config", cfg.config);
  write_header(out, cfg, echo);
  out << "# cases=" << report.cases.size() << " as_expected=" << report.count_as_expected()
      << " unexpected=" << report.count_unexpected() << " load_errors=" << load_errors.size() << '\n';
  out << "suite,case,result,detail\n";
  for (const auto& e : load_errors) out << "load," << quote(cfg.config) << ",ERROR," << quote(e) << '\n';
  for (const auto& c : report.cases) {
    out << c.suite << ',' << quote(c.name) << ',' << status(c) << ',' << quote(c.detail) << '\n';
  }
  if (report.count_unexpected() > 0) return kPropertyFailure;
  return load_errors.empty() ? kSuccess : kValidation;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Excursion effects: simulation, g-formula oracle, and estimation", "excursion"};
  app.require_subcommand(1, 1);

  const auto add_dgp = [&](CLI::App* sub) {
    sub->add_option("--dgp", cfg.dgp, "two-step | effect-modifier | tabular | csv")->capture_default_str();
    sub->add_option("--config", cfg.config, "tabular DGP config, or dataset CSV for --dgp csv");
  };
  const auto add_theta = [&](CLI::App* sub, const char* help) { sub->add_option("--theta", cfg.theta, help); };
  const auto add_estimand = [&](CLI::App* sub) {
    sub->add_option("--t", cfg.t, "enrollment time");
    sub->add_option("--delta", cfg.delta, "excursion length")->capture_default_str();
    sub->add_option("--summary", cfg.summary, "none | H | comma list of X<s>, A<s>, Y<s>")->capture_default_str();
  };
  const auto add_sample = [&](CLI::App* sub) {
    sub->add_option("--n", cfg.n, "subjects")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  };
  const auto add_run = [&](CLI::App* sub) {
    sub->add_option("--threads", cfg.threads, "worker threads (output does not depend on it)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", cfg.out, "output file (default stdout)");
  };
  const auto add_propensities = [&](CLI::App* sub) {
    sub->add_option("--propensities", cfg.propensities, "known | estimated")->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "draw a dataset from a sequentially randomized experiment");
  add_dgp(simulate);
  add_theta(simulate, "randomization probability");
  add_sample(simulate);
  add_run(simulate);

  auto* oracle = app.add_subcommand("oracle", "exact excursion effects by enumeration");
  add_dgp(oracle);
  add_theta(oracle, "randomization probability");
  add_estimand(oracle);
  add_run(oracle);

  auto* estimate = app.add_subcommand("estimate", "weighted person-trial estimate of the excursion effect");
  add_dgp(estimate);
  add_theta(estimate, "randomization probability");
  add_estimand(estimate);
  add_sample(estimate);
  add_propensities(estimate);
  add_run(estimate);

  auto* sweep_theta = app.add_subcommand("sweep-theta", "two-step effect over a grid of randomization probabilities");
  add_theta(sweep_theta, "comma-separated grid in [0,1] (default: 21 points from 0.05 to 0.95)");
  add_sample(sweep_theta);
  add_propensities(sweep_theta);
  add_run(sweep_theta);

  auto* sweep_modifier = app.add_subcommand("sweep-modifier", "effect-modifier excursion effect as a function of x2");
  add_theta(sweep_modifier, "comma-separated randomization probabilities (default 0.05,0.5,0.95)");
  sweep_modifier->add_option("--x2", cfg.x2, "comma-separated x2 grid")->capture_default_str();
  add_run(sweep_modifier);

  auto* check = app.add_subcommand("check", "property batteries over random DGPs");
  check->add_option("suite", cfg.suite, "all | null-preservation | weighted-average | variation-independence")
      ->capture_default_str();
  check->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  check->add_option("--config", cfg.config, "extra tabular DGP to include");
  add_run(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kValidation;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  std::ostringstream buffer;
  int code = kSuccess;
  try {
    if (cfg.n < 1) throw ValidationError("--n must be positive");
    if (cfg.command == "simulate") code = cmd_simulate(cfg, buffer);
    else if (cfg.command == "oracle") code = cmd_oracle(cfg, buffer);
    else if (cfg.command == "estimate") code = cmd_estimate(cfg, buffer);
    else if (cfg.command == "sweep-theta") code = cmd_sweep_theta(cfg, buffer);
    else if (cfg.command == "sweep-modifier") code = cmd_sweep_modifier(cfg, buffer);
    else code = cmd_check(cfg, buffer);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::validation ? kValidation : kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }

  if (cfg.out.empty()) {
    out << buffer.str();
  } else {
    std::ofstream file(cfg.out, std::ios::binary);
    if (!(file << buffer.str())) {
      err << "error: cannot write '" << cfg.out << "'\n";
      return kValidation;
    }
  }
  if (code == kPropertyFailure) err << "property check failed\n";
  if (code == kValidation) err << "some configs could not be loaded\n";
  return code;
}

}  // namespace excursion::cli
