#pragma once

#include <memory>

#include "slans/fem.hpp"
#include "slans/linalg.hpp"

namespace slans {

enum class ProjectionTarget {
  /// The full discrete velocity space with homogeneous boundary values.
  kVelocitySpace,
  /// Its weakly divergence-free subspace {z : (div z, q) = 0 for all q}.
  kDivergenceFree,
};

/// Velocity-space operators on a fixed mixed space. Holds the assembled
/// mass, stiffness and divergence matrices and the factorizations of the
/// saddle-point systems used for projections onto the weakly
/// divergence-free subspace. Immutable; every method is re-entrant.
class DiscreteOperators {
 public:
  explicit DiscreteOperators(std::shared_ptr<const MixedSpace> space);
  ~DiscreteOperators();

  const MixedSpace& space() const { return *space_; }
  const std::shared_ptr<const MixedSpace>& space_ptr() const { return space_; }

  /// Unconstrained operators (boundary rows included).
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const SparseMatrix& divergence() const { return divergence_; }
  const Vector& pressure_mean() const { return pressure_mean_; }

  // Norms of velocity coefficient vectors.
  double l2_norm(const Vector& u) const;
  double grad_norm(const Vector& u) const;
  /// Full H1 norm (||u||^2 + ||grad u||^2)^(1/2).
  double h1_norm(const Vector& u) const;
  /// (||u||^2 + alpha^2 ||grad u||^2)^(1/2); alpha must lie in (0, 1].
  double alpha_norm(const Vector& u, double alpha) const;
  /// max |(B u)_i|: the weak divergence residual.
  double divergence_residual(const Vector& u) const;

  /// L2 projection of a discrete field given by its load vector (v, phi_i).
  Vector l2_project_load(const Vector& load, ProjectionTarget target) const;
  Vector l2_project(const Vector& v, ProjectionTarget target = ProjectionTarget::kDivergenceFree) const;
  Vector l2_project(const VectorFunction& v, ProjectionTarget target = ProjectionTarget::kDivergenceFree) const;

  /// Discrete Laplacian onto the divergence-free subspace:
  /// (lap_h z, phi) = -(grad z, grad phi) for every discretely divergence-free phi.
  Vector discrete_laplacian(const Vector& z) const;

  /// (grad R v, grad phi) = (grad v, grad phi) for all discretely
  /// divergence-free phi; R v is discretely divergence-free.
  Vector ritz_project(const Vector& v) const;
  Vector ritz_project(const GradientFunction& grad_v) const;
  /// Same defining identity, for fields vanishing on the boundary.
  Vector elliptic_project(const Vector& z) const { return ritz_project(z); }
  Vector elliptic_project(const GradientFunction& grad_z) const { return ritz_project(grad_z); }

 private:
  Vector solve_saddle(const LuFactorization& lu, const Vector& velocity_rhs) const;

  std::shared_ptr<const MixedSpace> space_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
  SparseMatrix divergence_;
  Vector pressure_mean_;
  std::unique_ptr<LuFactorization> mass_lu_;          // M on H_h
  std::unique_ptr<LuFactorization> mass_saddle_lu_;   // [M B^T; B 0]
  std::unique_ptr<LuFactorization> stiff_saddle_lu_;  // [K B^T; B 0]
};

/// Assembles the constrained saddle-point matrix
///   [ A   -B^T ]
///   [ -B   0   ]
/// over (velocity, pressure) with Dirichlet rows on the velocity block and
/// pressure dof 0 pinned. `mean` is only checked for length; callers shift
/// the pressure afterwards.
SparseMatrix saddle_matrix(const MixedSpace& space, const SparseMatrix& velocity_block,
                           const SparseMatrix& divergence, const Vector& mean);

/// ||u||_alpha with parameter validation: alpha in (0, 1].
double alpha_norm(const DiscreteOperators& ops, const Vector& u, double alpha);

struct FilterResult {
  Vector filtered;  // U
  Vector pressure;  // the filter's pressure multiplier
};

/// Discrete differential filter at a fixed (mesh, alpha):
///   alpha^2 (grad U, grad psi) + (U, psi) - (P, div psi) = (v, psi),
///   (div U, q) = 0.
/// One factorization per context; apply() is re-entrant.
class FilterContext {
 public:
  FilterContext(std::shared_ptr<const DiscreteOperators> ops, double alpha);
  ~FilterContext();

  double alpha() const { return alpha_; }
  const DiscreteOperators& operators() const { return *ops_; }

  /// Filters a discrete velocity field v (coefficients).
  FilterResult apply(const Vector& v) const;
  /// Filters given the load vector (v, psi_i).
  FilterResult apply_load(const Vector& load) const;

 private:
  std::shared_ptr<const DiscreteOperators> ops_;
  double alpha_;
  std::unique_ptr<LuFactorization> lu_;
};

}  // namespace slans
