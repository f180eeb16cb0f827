#pragma once

#include <cstdint>

#include "excursion/dgp.hpp"
#include "excursion/protocol.hpp"

namespace excursion {

struct SimulationOptions {
  int threads = 1;
};

/// Draws n trajectories from a sequentially randomized experiment.
///
/// Subject i at time t uses CounterStream(seed, i, t), so the dataset is a pure
/// function of (dgp, protocol, eligibility, n, seed) whatever the thread count.
/// I*_t = 0 forces A_t = 0. Throws ValidationError on horizon mismatch, n < 1,
/// or a protocol probability outside [0,1].
Dataset simulate_sre(const Dgp& dgp, const Protocol& protocol, const EligibilitySpec& eligibility,
                     std::int64_t n, std::uint64_t seed, const SimulationOptions& options = {});

/// Same process with treatments set by `regime` (which must govern from t = 0).
/// Deterministic requests for A_t = 1 at I*_t = 0 are overridden to 0.
Dataset simulate_regime(const Dgp& dgp, const Regime& regime, const EligibilitySpec& eligibility,
                        std::int64_t n, std::uint64_t seed, const SimulationOptions& options = {});

}  // namespace excursion
