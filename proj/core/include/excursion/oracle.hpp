#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "excursion/dgp.hpp"
#include "excursion/protocol.hpp"

namespace excursion {

using SummaryValue = std::vector<double>;

/// A map S from H_t to a finite summary value.
class Summary {
 public:
  using Fn = std::function<SummaryValue(const History&)>;
  using Labeler = std::function<std::string(const SummaryValue&)>;

  /// `width` is the fixed length of every value, if there is one.
  Summary(std::string name, Fn fn, Labeler labeler, bool identity = false,
          std::optional<std::size_t> width = std::nullopt);

  /// S = ∅.
  static Summary empty();
  static Summary treatment(int time);
  static Summary covariate(int time);
  static Summary outcome(int time);
  /// S = H_t, laid out as (X_0..X_t, I*_0..I*_{t-1}, A_0..A_{t-1}, Y_0..Y_{t-1}).
  static Summary full_history();
  /// Concatenation of fixed-width summaries.
  static Summary combine(const std::vector<Summary>& parts);
  /// "none", "H", or a comma list of X<s>/A<s>/Y<s> terms.
  static Summary parse(const std::string& text);

  const std::string& name() const noexcept { return name_; }
  bool is_identity() const noexcept { return identity_; }
  std::optional<std::size_t> width() const noexcept { return width_; }
  SummaryValue operator()(const History& history) const { return fn_(history); }
  std::string label(const SummaryValue& value) const { return labeler_(value); }

 private:
  std::string name_;
  Fn fn_;
  Labeler labeler_;
  bool identity_;
  std::optional<std::size_t> width_;
};

/// Conditioning event {S_t = value, I_t = 1} (eligibility optional).
struct Condition {
  int time = 0;
  Summary summary = Summary::empty();
  SummaryValue value;
  bool require_eligible = true;
};

struct OracleOptions {
  EligibilitySpec eligibility = EligibilitySpec::all_eligible();
  /// Enumeration tree size above which EnumerationLimitError is thrown.
  std::size_t node_limit = 20'000'000;
};

/// Ā_{t-1} from the protocol, `actions` from t on, then `follow` (if given)
/// from t + actions.size().
Regime excursion_regime(const Protocol& protocol, int t, std::vector<int> actions,
                        const std::optional<Regime>& follow = std::nullopt);

/// Mean of Y_endpoint under `regime` within one summary cell.
struct MeanCell {
  SummaryValue value;
  History representative;  ///< one history in the cell (the first enumerated)
  double mass = 0.0;       ///< probability of the conditioning cell
  double mean = 0.0;
};

/// g-formula by exhaustive enumeration: iterates the covariate, availability
/// and outcome laws with A_t set by `regime` (which must govern from t = 0),
/// grouping paths by S at `condition_time` and optionally restricting to I_t = 1.
/// Cells are ordered lexicographically by summary value.
std::vector<MeanCell> counterfactual_cells(const Dgp& dgp, const Regime& regime, int endpoint,
                                           int condition_time, const Summary& summary,
                                           bool require_eligible, const OracleOptions& options = {});

/// E{Y_endpoint(regime) | condition}. Throws ValidationError for a
/// zero-probability condition and NotEnumerableError for sample-only laws.
double counterfactual_mean(const Dgp& dgp, const Regime& regime, int endpoint,
                           const std::optional<Condition>& condition = std::nullopt,
                           const OracleOptions& options = {});

enum class Contrast { blip_to_zero, continuous_vs_never, regime_specific };

const char* to_string(Contrast contrast);

struct EstimandSpec {
  int t = 0;
  int delta = 1;
  Summary summary = Summary::empty();
  Contrast contrast = Contrast::blip_to_zero;
  std::optional<Regime> regime;  ///< follow-up regime g for regime_specific
  EligibilitySpec eligibility = EligibilitySpec::all_eligible();

  /// Index k of the endpoint Y_{t,Δ} = Y_k, k = t + Δ - 1.
  int endpoint() const noexcept { return t + delta - 1; }
  /// Same estimand addressed by (t, k).
  static EstimandSpec at_endpoint(int t, int k, Summary summary = Summary::empty(),
                                  Contrast contrast = Contrast::blip_to_zero);
  void validate(int horizon) const;
};

struct BlipEntry {
  SummaryValue value;
  std::string label;
  double blip = 0.0;
  double mass = 0.0;
  double numerator_mean = 0.0;
  double denominator_mean = 0.0;
  History representative;
};

struct BlipTable {
  std::string contrast;
  int t = 0;
  int delta = 1;
  std::vector<BlipEntry> entries;

  const BlipEntry& at(const SummaryValue& value) const;
  /// Value of the only entry (S = ∅); throws UsageError otherwise.
  double marginal() const;
};

/// log E{Y_{t,Δ}(Ā_{t-1}, 1, 0̄) | S_t, I_t = 1} / E{Y_{t,Δ}(Ā_{t-1}, 0, 0̄) | S_t, I_t = 1}
/// with Ā_{t-1} drawn from `protocol`. Throws UndefinedBlipError on a zero mean.
BlipTable excursion_blip(const Dgp& dgp, const Protocol& protocol, const EstimandSpec& spec);

/// As excursion_blip with numerator regime (Ā_{t-1}, 1̄_Δ).
BlipTable continuous_vs_never_blip(const Dgp& dgp, const Protocol& protocol, const EstimandSpec& spec);

/// γ^g_{t,k}: a_t = 1 vs a_t = 0, then g from t+1 through k, conditioning on
/// `conditioning` at t and I_t = 1.
BlipTable regime_blip(const Dgp& dgp, const Protocol& protocol, const Regime& g, int t, int k,
                      const Summary& conditioning, const OracleOptions& options = {});

/// Dispatches on spec.contrast.
BlipTable compute_blip(const Dgp& dgp, const Protocol& protocol, const EstimandSpec& spec);

/// HR-MSM surface: E{Y_{t+Δ}(Ā_{t-1}, a_t..a_{t+Δ}) | S_t, I_t = 1} for every
/// path in {0,1}^{Δ+1}, plus each path's log contrast against the zero path.
struct HrMsmSurface {
  struct Cell {
    SummaryValue value;
    std::string label;
    std::vector<int> path;
    double mean = 0.0;
    double contrast = 0.0;  ///< log(mean / mean at 0̄); NaN if undefined
  };
  int t = 0;
  int delta = 0;
  std::vector<Cell> cells;

  double mean(const SummaryValue& value, const std::vector<int>& path) const;
  double contrast(const SummaryValue& value, const std::vector<int>& path) const;
};

inline constexpr int kMaxSurfaceDelta = 20;

HrMsmSurface hr_msm_surface(const Dgp& dgp, const Protocol& protocol, int t, int delta,
                            const Summary& summary, const OracleOptions& options = {});

/// CSV with header `contrast,t,delta,summary_value,value`.
void write_blip_csv(std::ostream& out, std::span<const BlipTable> tables);

}  // namespace excursion
