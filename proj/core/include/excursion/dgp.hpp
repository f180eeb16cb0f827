#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "excursion/rng.hpp"
#include "excursion/trajectory.hpp"

namespace excursion {

/// Finite-support law: P(X = values[i]) = probs[i].
struct DiscreteLaw {
  std::vector<double> values;
  std::vector<double> probs;
};

/// N(mean, sd^2); enumerated by Gauss-Hermite quadrature in the oracle.
struct GaussianLaw {
  double mean = 0.0;
  double sd = 1.0;
};

/// A law that can only be sampled; DGPs using it are not oracle-enumerable.
struct SampledLaw {
  std::function<double(CounterStream&)> sample;
};

using CovariateLaw = std::variant<DiscreteLaw, GaussianLaw, SampledLaw>;

DiscreteLaw point_mass(double value);

/// Factorized generative law over trajectories with horizon T.
///
/// The three law callbacks receive the partially filled path and the time t.
/// They may read, at time t:
///   covariate:    X, I*, A, Y at times < t
///   availability: the above plus X_t
///   outcome:      the above plus I*_t and A_t
class Dgp {
 public:
  struct Laws {
    std::function<CovariateLaw(const Trajectory&, int)> covariate;
    std::function<double(const Trajectory&, int)> availability;
    std::function<double(const Trajectory&, int)> outcome;
  };

  Dgp(std::string name, int horizon, Laws laws, bool absorbing = false, int quadrature_nodes = 64);

  const std::string& name() const noexcept { return name_; }
  int horizon() const noexcept { return horizon_; }
  bool absorbing() const noexcept { return absorbing_; }
  int quadrature_nodes() const noexcept { return quadrature_nodes_; }

  /// Validated laws. Probabilities outside [0,1] or malformed discrete laws
  /// throw ValidationError. With an absorbing outcome, Y_{t-1} = 1 forces Y_t = 1.
  CovariateLaw covariate_law(const Trajectory& path, int t) const;
  double availability_probability(const Trajectory& path, int t) const;
  double outcome_probability(const Trajectory& path, int t) const;

 private:
  std::string name_;
  int horizon_;
  std::shared_ptr<const Laws> laws_;
  bool absorbing_;
  int quadrature_nodes_;
};

}  // namespace excursion
