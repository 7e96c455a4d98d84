#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "slans/linalg.hpp"
#include "slans/mesh.hpp"
#include "slans/quadrature.hpp"

namespace slans {

/// Lagrange space of degree 1 or 2 on a triangulation. Dofs: vertices first,
/// then (for P2) one dof per edge at its midpoint.
class ScalarSpace {
 public:
  ScalarSpace(std::shared_ptr<const Mesh> mesh, int degree);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int num_dofs() const { return num_dofs_; }
  int dofs_per_cell() const { return degree_ == 1 ? 3 : 6; }

  /// Local dofs of a cell: 3 vertex dofs, then (P2) the dofs of local edges
  /// (0,1), (1,2), (2,0).
  std::array<int, 6> cell_dofs(std::size_t cell) const;
  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<int>& boundary_dofs() const { return boundary_dofs_; }
  bool is_boundary_dof(int dof) const { return on_boundary_[dof]; }

 private:
  std::shared_ptr<const Mesh> mesh_;
  int degree_;
  int num_dofs_;
  std::vector<Point> nodes_;
  std::vector<int> boundary_dofs_;
  std::vector<bool> on_boundary_;
};

/// Mixed velocity/pressure pair. Velocity coefficients are blocked by
/// component: dof (c, s) lives at index c * velocity_scalar().num_dofs() + s.
/// Pressures are continuous P1, fixed to zero mean after each solve.
class MixedSpace {
 public:
  /// P2 velocity / P1 pressure.
  static std::shared_ptr<const MixedSpace> taylor_hood(std::shared_ptr<const Mesh> mesh);
  /// P1 / P1: violates the inf-sup condition; used to validate the probe.
  static std::shared_ptr<const MixedSpace> equal_order_p1(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return velocity_.mesh(); }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return velocity_.mesh_ptr(); }
  const ScalarSpace& velocity_scalar() const { return velocity_; }
  const ScalarSpace& pressure() const { return pressure_; }

  int num_velocity_dofs() const { return 2 * velocity_.num_dofs(); }
  int num_pressure_dofs() const { return pressure_.num_dofs(); }
  int velocity_dof(int component, int scalar_dof) const {
    return component * velocity_.num_dofs() + scalar_dof;
  }
  /// Every boundary velocity dof (both components); homogeneous Dirichlet.
  const std::vector<int>& dirichlet_dofs() const { return dirichlet_; }
  bool is_dirichlet(int velocity_dof) const { return dirichlet_mask_[velocity_dof]; }

  MixedSpace(ScalarSpace velocity, ScalarSpace pressure);

 private:
  ScalarSpace velocity_;
  ScalarSpace pressure_;
  std::vector<int> dirichlet_;
  std::vector<bool> dirichlet_mask_;
};

enum class FieldRole { kVelocity, kPressure };

/// Coefficient vector tagged with its role in a mixed space.
struct Field {
  FieldRole role = FieldRole::kVelocity;
  Vector coeffs;

  /// Throws SpaceMismatch when the length does not match the space.
  void check(const MixedSpace& space) const;
};

using ScalarFunction = std::function<double(double, double)>;
using VectorFunction = std::function<std::array<double, 2>(double, double)>;
/// Returns {du_x/dx, du_x/dy, du_y/dx, du_y/dy}.
using GradientFunction = std::function<std::array<double, 4>(double, double)>;

/// Per-cell affine geometry: gradients of the barycentric coordinates.
struct CellGeometry {
  double area = 0.0;
  std::array<std::array<double, 2>, 3> grad_lambda{};
  std::array<Point, 3> corners{};

  static CellGeometry of(const Mesh& mesh, std::size_t cell);
  Point map(const std::array<double, 3>& bary) const;
};

/// Values and physical gradients of the local basis at one point.
struct BasisValues {
  std::array<double, 6> value{};
  std::array<std::array<double, 2>, 6> grad{};
};

BasisValues evaluate_basis(int degree, const std::array<double, 3>& bary, const CellGeometry& geom);

// ---- assembly -------------------------------------------------------------

SparseMatrix assemble_scalar_mass(const ScalarSpace& space);
SparseMatrix assemble_scalar_stiffness(const ScalarSpace& space);

/// Vector velocity mass matrix (block diagonal over components), no
/// constraints applied.
SparseMatrix assemble_mass(const MixedSpace& space);
/// Vector velocity stiffness (grad u : grad v).
SparseMatrix assemble_stiffness(const MixedSpace& space);
SparseMatrix assemble_pressure_mass(const MixedSpace& space);
/// Integrals of the pressure basis functions; the zero-mean row.
Vector pressure_mean_weights(const MixedSpace& space);

/// B with q^T B u = (q, div u).
SparseMatrix assemble_divergence(const MixedSpace& space);

enum class ConvectionForm {
  /// <[z1.grad] z2, w> + <(grad z1)^T z2, w>.
  kStandard,
  /// The standard form plus 1/2 (div z1, z2.w) + 1/2 (div w, z1.z2). Equal to
  /// the standard form on exactly divergence-free fields and antisymmetric in
  /// (z1, w) for all discrete fields.
  kSkew,
};

/// C(v) with (C u) . phi = b(u, v, phi) for the LANS trilinear form.
SparseMatrix assemble_convection(const MixedSpace& space, const Vector& v_known, ConvectionForm form);

/// N(w) with (N v) . phi = 1/2 <[w.grad] v, phi> - 1/2 <[w.grad] phi, v>.
SparseMatrix assemble_transport_skew(const MixedSpace& space, const Vector& advecting);

/// b(z1, z2, w) evaluated by quadrature.
double trilinear(const MixedSpace& space, const Vector& z1, const Vector& z2, const Vector& w,
                 ConvectionForm form);

// ---- constraints ------------------------------------------------------------

/// Constrains every boundary velocity dof of `field` to zero.
void apply_dirichlet(BlockSystem& system, int field, const MixedSpace& space);
/// Constrains every boundary dof of a scalar field to zero.
void apply_dirichlet(BlockSystem& system, int field, const ScalarSpace& space);
/// Fixes pressure dof 0 of `field`. With no-slip velocity the pressure is only
/// defined up to a constant; pin, solve, then call remove_pressure_mean.
void pin_pressure(BlockSystem& system, int field, const MixedSpace& space);
/// Shifts p by a constant so that (p, 1) = 0.
void remove_pressure_mean(Vector& p, const Vector& mean_weights);

/// Zeroes Dirichlet rows and columns of a velocity-velocity operator and sets
/// unit diagonals there.
SparseMatrix constrain_velocity_operator(const SparseMatrix& a, const MixedSpace& space);
/// Sets Dirichlet entries of a velocity vector to zero.
void zero_dirichlet(Vector& v, const MixedSpace& space);

// ---- interpolation, loads and errors --------------------------------------

Vector interpolate(const ScalarSpace& space, const ScalarFunction& f);
Vector interpolate_velocity(const MixedSpace& space, const VectorFunction& f);

/// (f, phi_i) for scalar basis functions.
Vector load_scalar(const ScalarSpace& space, const ScalarFunction& f, int gauss_order = 6);
/// (f, phi_i) for vector velocity basis functions.
Vector load_velocity(const MixedSpace& space, const VectorFunction& f, int gauss_order = 6);
/// (grad f, grad phi_i) for vector velocity basis functions.
Vector load_velocity_gradient(const MixedSpace& space, const GradientFunction& grad_f,
                              int gauss_order = 6);

double l2_error(const ScalarSpace& space, const Vector& u, const ScalarFunction& exact, int gauss_order = 8);
double l2_error_velocity(const MixedSpace& space, const Vector& u, const VectorFunction& exact,
                         int gauss_order = 8);

/// Value of a velocity field at barycentric coordinates of a cell.
std::array<double, 2> evaluate_velocity(const MixedSpace& space, const Vector& u, std::size_t cell,
                                        const std::array<double, 3>& bary);

/// Injects a velocity field from `coarse` into the nested space `fine`,
/// whose mesh was produced by refine_uniform from coarse's mesh. Exact for
/// nested Lagrange spaces.
Vector prolongate_velocity(const MixedSpace& coarse, const MixedSpace& fine, const Vector& u);

/// Number of workers used by cell-parallel assembly.
int assembly_workers();
void set_assembly_workers(int workers);

}  // namespace slans
