#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "excursion/oracle.hpp"
#include "excursion/tabular.hpp"

namespace excursion {

struct NullPreservationReport {
  struct Violation {
    int t = 0;
    std::string history;
    double blip = 0.0;
  };
  bool blips_null = false;       ///< every γ_{t,k}(H_t) with g ≡ 0 within tol
  bool passed = false;           ///< blips_null and spread <= tol
  double max_abs_blip = 0.0;
  double spread = 0.0;           ///< max - min of E{Y_k(g)} over identified regimes
  int regimes_checked = 0;
  int regimes_skipped = 0;       ///< not identified under availability
  std::vector<Violation> violations;

  std::string summary() const;
};

/// If all g ≡ 0 blips γ_{t,k}(H_t), t = 0..k, vanish, checks that every static
/// regime and a library of dynamic and random regimes gives the same E{Y_k}.
NullPreservationReport check_null_preservation(const Dgp& dgp, const Protocol& protocol, int k,
                                               double tol = 1e-9, const OracleOptions& options = {});

struct WeightedAverageReport {
  bool passed = true;
  int cells_checked = 0;
  double max_bracket_violation = 0.0;  ///< how far exp γ(s) falls outside [min, max] of exp γ(H)
  double max_identity_error = 0.0;     ///< |exp γ(s) - weighted mean of exp γ(H)|
  std::vector<std::string> failures;

  std::string summary() const;
};

/// exp γ^g_{t,k}(s) is a weighted average of exp γ^g_{t,k}(H_t) over histories
/// with S_t = s, with weights P(H_t | s) E{Y_k(Ā_{t-1}, 0, g) | H_t}.
WeightedAverageReport check_weighted_average(const Dgp& dgp, const Protocol& protocol, const Regime& g,
                                             int t, int k, const Summary& summary, double tol = 1e-9,
                                             const OracleOptions& options = {});

/// Constant blip target β_{m,Δ}(H_m) ≡ blip for all histories, with an
/// optional pinned baseline E{Y(Ā_{m-1}, 0̄) | H_m} ≡ baseline.
struct BlipTarget {
  int m = 0;
  int delta = 1;
  double blip = 0.0;
  std::optional<double> baseline;
};

struct ProbeOptions {
  int model_size = 2;  ///< horizon T of the binary model
  std::uint64_t seed = 1;
  int max_iterations = 300;
  double tolerance = 1e-6;
};

enum class ProbeStatus { feasible, infeasible, not_converged };
const char* to_string(ProbeStatus status);

struct ProbeResult {
  ProbeStatus status = ProbeStatus::not_converged;
  std::optional<TabularSpec> distribution;
  std::string certificate;  ///< why no law exists (infeasible only)
  double max_residual = 0.0;
  int iterations = 0;
};

/// Searches the binary model of horizon T (binary covariate per time, all
/// available, protocol 1/2, outcome only at the common endpoint) for a law whose
/// history-conditional blips equal every target. Targets must share m + Δ.
/// Infeasibility is certified when the targets imply a Bernoulli mean outside
/// (0, 1]; failure of the search otherwise is reported as not_converged.
ProbeResult variation_independence_probe(std::span<const BlipTarget> targets, const ProbeOptions& options = {});

}  // namespace excursion
