#include "slans/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "slans/error.hpp"

namespace slans {
namespace {

void add_orbit_1(QuadratureRule& rule, double w) {
  rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  rule.weights.push_back(w);
}

// Points (a, b, b) and permutations.
void add_orbit_3(QuadratureRule& rule, double a, double b, double w) {
  rule.points.push_back({a, b, b});
  rule.points.push_back({b, a, b});
  rule.points.push_back({b, b, a});
  for (int i = 0; i < 3; ++i) rule.weights.push_back(w);
}

// Points (a, b, c), all six permutations.
void add_orbit_6(QuadratureRule& rule, double a, double b, double c, double w) {
  const double p[6][3] = {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}};
  for (const auto& q : p) {
    rule.points.push_back({q[0], q[1], q[2]});
    rule.weights.push_back(w);
  }
}

}  // namespace

QuadratureRule dunavant_rule(int degree) {
  if (degree < 0) throw InvalidParameter("quadrature degree must be non-negative");
  QuadratureRule rule;
  switch (degree) {
    case 0:
    case 1:
      add_orbit_1(rule, 1.0);
      rule.degree = 1;
      break;
    case 2:
      add_orbit_3(rule, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0);
      rule.degree = 2;
      break;
    case 3:
      add_orbit_1(rule, -0.5625);
      add_orbit_3(rule, 0.6, 0.2, 25.0 / 48.0);
      rule.degree = 3;
      break;
    case 4:
      add_orbit_3(rule, 0.108103018168070, 0.445948490915965, 0.223381589678011);
      add_orbit_3(rule, 0.816847572980459, 0.091576213509771, 0.109951743655322);
      rule.degree = 4;
      break;
    case 5:
      add_orbit_1(rule, 0.225);
      add_orbit_3(rule, 0.059715871789770, 0.470142064105115, 0.132394152788506);
      add_orbit_3(rule, 0.797426985353087, 0.101286507323456, 0.125939180544827);
      rule.degree = 5;
      break;
    case 6:
      add_orbit_3(rule, 0.501426509658179, 0.249286745170910, 0.116786275726379);
      add_orbit_3(rule, 0.873821971016996, 0.063089014491502, 0.050844906370207);
      add_orbit_6(rule, 0.053145049844817, 0.310352451033784, 0.636502499121399, 0.082851075618374);
      rule.degree = 6;
      break;
    default:
      return collapsed_gauss_rule((degree + 3) / 2);
  }
  // Tabulated weights are normalized to unit area; rescale and renormalize
  // the barycentric triples so they sum to one exactly.
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w *= 0.5 / total;
  for (auto& p : rule.points) {
    const double s = p[0] + p[1] + p[2];
    for (double& c : p) c /= s;
  }
  return rule;
}

void gauss_legendre_unit(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  if (order < 1) throw InvalidParameter("Gauss-Legendre order must be >= 1");
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  for (int i = 0; i < order; ++i) {
    // Chebyshev-like initial guess, then Newton on P_order.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = 0.5 * (1.0 - x);
    weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

QuadratureRule collapsed_gauss_rule(int order) {
  std::vector<double> x, w;
  gauss_legendre_unit(order, x, w);
  QuadratureRule rule;
  rule.degree = 2 * order - 2;
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      const double u = x[i];
      const double v = x[j] * (1.0 - u);
      rule.points.push_back({1.0 - u - v, u, v});
      rule.weights.push_back(w[i] * w[j] * (1.0 - u));
    }
  }
  return rule;
}

}  // namespace slans
