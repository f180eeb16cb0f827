#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "excursion/tabular.hpp"

namespace excursion {

struct BatteryCase {
  std::string suite;
  std::string name;
  bool passed = false;
  bool expected_failure = false;  ///< demo cases that must fail
  std::string detail;

  /// Passed, or failed when failure was expected.
  bool as_expected() const { return passed != expected_failure; }
};

struct BatteryReport {
  std::vector<BatteryCase> cases;

  int count_as_expected() const;
  int count_unexpected() const;
  void append(const BatteryReport& other);
};

/// Options of the i-th DGP in the random battery: T = 1 + i mod 3, null
/// outcomes for even i, random availability when i mod 4 < 2.
RandomTabularOptions battery_dgp_options(int index);
TabularSpec battery_dgp(std::uint64_t seed, int index);

/// Weighted-average identity on `n_dgps` random DGPs, over every t <= T with
/// k = T, g in {0, carry-forward when identified} and S in {none, X_t, A_{t-1}}.
BatteryReport weighted_average_battery(std::uint64_t seed, int n_dgps = 100);

/// Null preservation on the null-constructed DGPs of the same battery, plus
/// the two-step DGP as an expected failure.
BatteryReport null_preservation_battery(std::uint64_t seed, int n_dgps = 100);

/// `admissible` random constant-blip target sets on the T = 2 binary model
/// (must be feasible) and `infeasible` constructed out-of-range sets (must be
/// certified infeasible).
BatteryReport variation_independence_battery(std::uint64_t seed, int admissible = 20, int infeasible = 5);

}  // namespace excursion
