#include "excursion/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>

#include "excursion/errors.hpp"

namespace excursion {

namespace {

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials,
// whose weight function is the standard normal density (total mass 1).
QuadratureRule build_rule(int n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    const double b = std::sqrt(static_cast<double>(i + 1));
    jacobi(i, i + 1) = b;
    jacobi(i + 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigen-decomposition failed");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    rule.weights[static_cast<std::size_t>(i)] = v0 * v0;
    total += v0 * v0;
  }
  for (auto& w : rule.weights) w /= total;
  // Symmetrize: the rule is exactly symmetric about 0.
  for (int i = 0; i < n / 2; ++i) {
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
    const double w = 0.5 * (rule.weights[hi] + rule.weights[lo]);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = rule.weights[hi] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

}  // namespace

const QuadratureRule& gauss_hermite_normal(int n) {
  if (n < 1 || n > 512) throw ValidationError("Gauss-Hermite node count must be in [1, 512]");
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
  return it->second;
}

}  // namespace excursion
