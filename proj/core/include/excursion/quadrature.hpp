#pragma once

#include <vector>

namespace excursion {

/// Nodes and weights with sum_i w_i f(x_i) ≈ E f(Z), Z ~ N(0,1).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Hermite rule rescaled to the standard normal (Golub-Welsch).
/// Exact for polynomials of degree <= 2n - 1. Rules are cached per n.
const QuadratureRule& gauss_hermite_normal(int n);

}  // namespace excursion
