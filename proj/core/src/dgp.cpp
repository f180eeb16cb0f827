#include "excursion/dgp.hpp"

#include <cmath>
#include <numeric>

#include "excursion/errors.hpp"
#include "excursion/format.hpp"

namespace excursion {

namespace {

void check_probability(double p, const char* what, int t) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError(std::string(what) + " probability " + format_number(p) + " outside [0,1] at t=" +
                          std::to_string(t));
  }
}

}  // namespace

DiscreteLaw point_mass(double value) { return DiscreteLaw{{value}, {1.0}}; }

Dgp::Dgp(std::string name, int horizon, Laws laws, bool absorbing, int quadrature_nodes)
    : name_(std::move(name)),
      horizon_(horizon),
      laws_(std::make_shared<const Laws>(std::move(laws))),
      absorbing_(absorbing),
      quadrature_nodes_(quadrature_nodes) {
  if (horizon_ < 0) throw ValidationError("DGP horizon must be >= 0");
  if (!laws_->covariate || !laws_->availability || !laws_->outcome) {
    throw ValidationError("DGP '" + name_ + "' is missing a law");
  }
  if (quadrature_nodes_ < 1) throw ValidationError("quadrature node count must be >= 1");
}

CovariateLaw Dgp::covariate_law(const Trajectory& path, int t) const {
  CovariateLaw law = laws_->covariate(path, t);
  if (const auto* d = std::get_if<DiscreteLaw>(&law)) {
    if (d->values.empty() || d->values.size() != d->probs.size()) {
      throw ValidationError("malformed discrete covariate law at t=" + std::to_string(t));
    }
    for (double p : d->probs) check_probability(p, "covariate", t);
    const double total = std::accumulate(d->probs.begin(), d->probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
      throw ProbabilitySumError("covariate law at t=" + std::to_string(t) + " sums to " + format_number(total));
    }
  } else if (const auto* g = std::get_if<GaussianLaw>(&law)) {
    if (!(g->sd > 0.0) || !std::isfinite(g->sd) || !std::isfinite(g->mean)) {
      throw ValidationError("Gaussian covariate law needs finite mean and sd > 0");
    }
  } else if (!std::get<SampledLaw>(law).sample) {
    throw ValidationError("sampled covariate law has no sampler");
  }
  return law;
}

double Dgp::availability_probability(const Trajectory& path, int t) const {
  const double p = laws_->availability(path, t);
  check_probability(p, "availability", t);
  return p;
}

double Dgp::outcome_probability(const Trajectory& path, int t) const {
  if (absorbing_ && t > 0 && path.outcomes[static_cast<std::size_t>(t - 1)] == 1) return 1.0;
  const double p = laws_->outcome(path, t);
  check_probability(p, "outcome", t);
  return p;
}

}  // namespace excursion
