#pragma once

// Test-side reference computations. Nothing here goes through the library's
// assembly loops: integrals are evaluated cell by cell from basis values.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "slans/fem.hpp"
#include "slans/quadrature.hpp"

namespace oracle {

using slans::DenseMatrix;
using slans::MixedSpace;
using slans::Vector;

struct PointValue {
  std::array<double, 2> u{};
  std::array<std::array<double, 2>, 2> grad{};  // grad[c][d] = d u_c / d x_d
};

inline PointValue velocity_at(const MixedSpace& space, const Vector& u, std::size_t cell,
                              const slans::BasisValues& b) {
  const auto& vs = space.velocity_scalar();
  const auto dofs = vs.cell_dofs(cell);
  PointValue p;
  for (int a = 0; a < vs.dofs_per_cell(); ++a) {
    for (int c = 0; c < 2; ++c) {
      const double coef = u[space.velocity_dof(c, dofs[a])];
      p.u[c] += coef * b.value[a];
      p.grad[c][0] += coef * b.grad[a][0];
      p.grad[c][1] += coef * b.grad[a][1];
    }
  }
  return p;
}

// Sum over cells and points of f(cell, x, y, basis) * physical weight.
inline double integrate(const MixedSpace& space,
                        const std::function<double(std::size_t, double, double, const slans::BasisValues&)>& f,
                        int order = 7) {
  const auto rule = slans::collapsed_gauss_rule(order);
  const auto& mesh = space.mesh();
  double total = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto g = slans::CellGeometry::of(mesh, c);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto b = slans::evaluate_basis(space.velocity_scalar().degree(), rule.points[q], g);
      const auto x = g.map(rule.points[q]);
      total += rule.weights[q] * 2.0 * g.area * f(c, x.x, x.y, b);
    }
  }
  return total;
}

// Standard-form trilinear integral <[z1.grad] z2, w> + <(grad z1)^T z2, w>,
// optionally with the two divergence corrections.
inline double trilinear(const MixedSpace& space, const Vector& z1, const Vector& z2, const Vector& w,
                        bool skew) {
  return integrate(space, [&](std::size_t c, double, double, const slans::BasisValues& b) {
    const auto a = velocity_at(space, z1, c, b);
    const auto v = velocity_at(space, z2, c, b);
    const auto t = velocity_at(space, w, c, b);
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        s += a.u[j] * v.grad[i][j] * t.u[i];  // (z1 . grad) z2 . w
        s += a.grad[i][j] * v.u[i] * t.u[j];  // (grad z1)^T z2 . w
      }
    }
    if (skew) {
      const double div_a = a.grad[0][0] + a.grad[1][1];
      const double div_t = t.grad[0][0] + t.grad[1][1];
      const double vt = v.u[0] * t.u[0] + v.u[1] * t.u[1];
      const double av = a.u[0] * v.u[0] + a.u[1] * v.u[1];
      s += 0.5 * div_a * vt + 0.5 * div_t * av;
    }
    return s;
  });
}

// <[w.grad] a, b>
inline double advect(const MixedSpace& space, const Vector& w, const Vector& a, const Vector& b) {
  return integrate(space, [&](std::size_t c, double, double, const slans::BasisValues& bv) {
    const auto tw = velocity_at(space, w, c, bv);
    const auto ta = velocity_at(space, a, c, bv);
    const auto tb = velocity_at(space, b, c, bv);
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) s += tw.u[j] * ta.grad[i][j] * tb.u[i];
    }
    return s;
  });
}

inline double l2_sq(const MixedSpace& space, const Vector& u) {
  return integrate(space, [&](std::size_t c, double, double, const slans::BasisValues& b) {
    const auto p = velocity_at(space, u, c, b);
    return p.u[0] * p.u[0] + p.u[1] * p.u[1];
  });
}

inline double h1_sq(const MixedSpace& space, const Vector& u) {
  return integrate(space, [&](std::size_t c, double, double, const slans::BasisValues& b) {
    const auto p = velocity_at(space, u, c, b);
    double s = p.u[0] * p.u[0] + p.u[1] * p.u[1];
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) s += p.grad[i][j] * p.grad[i][j];
    }
    return s;
  });
}

// ||u - f||_L2 against an analytic field.
inline double l2_error(const MixedSpace& space, const Vector& u,
                       const std::function<std::array<double, 2>(double, double)>& f) {
  return std::sqrt(integrate(
      space,
      [&](std::size_t c, double x, double y, const slans::BasisValues& b) {
        const auto p = velocity_at(space, u, c, b);
        const auto e = f(x, y);
        return (p.u[0] - e[0]) * (p.u[0] - e[0]) + (p.u[1] - e[1]) * (p.u[1] - e[1]);
      },
      9));
}

// Orthonormal basis (as columns over all velocity dofs) of the weakly
// divergence-free fields with zero boundary values. Dense; coarse meshes only.
inline DenseMatrix divergence_free_basis(const MixedSpace& space) {
  const int nv = space.num_velocity_dofs();
  std::vector<int> interior;
  for (int d = 0; d < nv; ++d) {
    if (!space.is_dirichlet(d)) interior.push_back(d);
  }
  const DenseMatrix B_full = DenseMatrix(slans::assemble_divergence(space));
  DenseMatrix B(B_full.rows(), interior.size());
  for (std::size_t j = 0; j < interior.size(); ++j) B.col(j) = B_full.col(interior[j]);
  Eigen::BDCSVD<DenseMatrix> svd(B, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double tol = 1e-10 * s[0];
  int rank = 0;
  while (rank < s.size() && s[rank] > tol) ++rank;
  const DenseMatrix kernel = svd.matrixV().rightCols(interior.size() - rank);
  DenseMatrix Z = DenseMatrix::Zero(nv, kernel.cols());
  for (std::size_t i = 0; i < interior.size(); ++i) Z.row(interior[i]) = kernel.row(i);
  return Z;
}

inline Vector random_combination(const DenseMatrix& Z, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Vector xi(Z.cols());
  for (int i = 0; i < xi.size(); ++i) xi[i] = n01(rng);
  return Z * xi;
}

// Random field with zero boundary values (not divergence-free).
inline Vector random_velocity(const MixedSpace& space, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Vector u(space.num_velocity_dofs());
  for (int i = 0; i < u.size(); ++i) u[i] = space.is_dirichlet(i) ? 0.0 : n01(rng);
  return u;
}

// Truncated noise trace per component: sum_{i,j<=M} 1/(i+j)^2.
inline double trace_per_component(int M) {
  double s = 0.0;
  for (int i = 1; i <= M; ++i) {
    for (int j = 1; j <= M; ++j) s += 1.0 / double((i + j) * (i + j));
  }
  return s;
}

}  // namespace oracle
