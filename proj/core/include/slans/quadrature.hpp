#pragma once

#include <array>
#include <vector>

namespace slans {

/// Quadrature on the reference triangle {(0,0),(1,0),(0,1)}. Points are
/// barycentric triples; weights sum to the reference area 1/2.
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
};

/// Symmetric Dunavant rule exact for polynomials of total degree <= `degree`
/// (supported: 1..6; higher requests fall back to collapsed Gauss).
QuadratureRule dunavant_rule(int degree);

/// Collapsed (Duffy) tensor Gauss-Legendre rule with `order` points per
/// direction, exact to degree 2*order - 2. Used for analytic integrands.
QuadratureRule collapsed_gauss_rule(int order);

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre_unit(int order, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace slans
