#include "slans/operators.hpp"

#include <cmath>

#include "slans/error.hpp"

namespace slans {
namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw InvalidParameter("alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
}

void check_velocity(const MixedSpace& space, const Vector& u, const char* what) {
  if (u.size() != space.num_velocity_dofs()) {
    throw SpaceMismatch(std::string(what) + ": expected a velocity vector of length " +
                        std::to_string(space.num_velocity_dofs()) + ", got " + std::to_string(u.size()));
  }
}

// Full solution vector of a saddle system with the given velocity rhs.
Vector saddle_solve(const MixedSpace& space, const LuFactorization& lu, const Vector& velocity_rhs) {
  Vector rhs = Vector::Zero(lu.size());
  rhs.head(space.num_velocity_dofs()) = velocity_rhs;
  for (int d : space.dirichlet_dofs()) rhs[d] = 0.0;
  return lu.solve(rhs);
}

}  // namespace

SparseMatrix saddle_matrix(const MixedSpace& space, const SparseMatrix& velocity_block, const SparseMatrix& divergence,
                           const Vector& mean) {
  BlockSystem sys;
  const int u = sys.add_field("u", space.num_velocity_dofs());
  const int p = sys.add_field("p", space.num_pressure_dofs());
  if (mean.size() != space.num_pressure_dofs()) throw DimensionMismatch("saddle_matrix: mean weights length");
  sys.add_block(u, u, velocity_block);
  sys.add_block(u, p, SparseMatrix(divergence.transpose()), -1.0);
  sys.add_block(p, u, divergence, -1.0);
  apply_dirichlet(sys, u, space);
  pin_pressure(sys, p, space);
  return sys.matrix();
}

DiscreteOperators::DiscreteOperators(std::shared_ptr<const MixedSpace> space) : space_(std::move(space)) {
  if (!space_) throw InvalidParameter("DiscreteOperators: null space");
  mass_ = assemble_mass(*space_);
  stiffness_ = assemble_stiffness(*space_);
  divergence_ = assemble_divergence(*space_);
  pressure_mean_ = pressure_mean_weights(*space_);
  mass_lu_ = std::make_unique<LuFactorization>(constrain_velocity_operator(mass_, *space_));
  mass_saddle_lu_ = std::make_unique<LuFactorization>(saddle_matrix(*space_, mass_, divergence_, pressure_mean_));
  stiff_saddle_lu_ =
      std::make_unique<LuFactorization>(saddle_matrix(*space_, stiffness_, divergence_, pressure_mean_));
}

DiscreteOperators::~DiscreteOperators() = default;

double DiscreteOperators::l2_norm(const Vector& u) const {
  check_velocity(*space_, u, "l2_norm");
  return std::sqrt(std::max(0.0, u.dot(mass_ * u)));
}

double DiscreteOperators::grad_norm(const Vector& u) const {
  check_velocity(*space_, u, "grad_norm");
  return std::sqrt(std::max(0.0, u.dot(stiffness_ * u)));
}

double DiscreteOperators::h1_norm(const Vector& u) const { return std::hypot(l2_norm(u), grad_norm(u)); }

double DiscreteOperators::alpha_norm(const Vector& u, double alpha) const {
  check_alpha(alpha);
  return std::hypot(l2_norm(u), alpha * grad_norm(u));
}

double DiscreteOperators::divergence_residual(const Vector& u) const {
  check_velocity(*space_, u, "divergence_residual");
  return (divergence_ * u).lpNorm<Eigen::Infinity>();
}

Vector DiscreteOperators::solve_saddle(const LuFactorization& lu, const Vector& velocity_rhs) const {
  return saddle_solve(*space_, lu, velocity_rhs).head(space_->num_velocity_dofs());
}

Vector DiscreteOperators::l2_project_load(const Vector& load, ProjectionTarget target) const {
  check_velocity(*space_, load, "l2_project_load");
  if (target == ProjectionTarget::kDivergenceFree) return solve_saddle(*mass_saddle_lu_, load);
  Vector rhs = load;
  zero_dirichlet(rhs, *space_);
  return mass_lu_->solve(rhs);
}

Vector DiscreteOperators::l2_project(const Vector& v, ProjectionTarget target) const {
  check_velocity(*space_, v, "l2_project");
  return l2_project_load(mass_ * v, target);
}

Vector DiscreteOperators::l2_project(const VectorFunction& v, ProjectionTarget target) const {
  return l2_project_load(load_velocity(*space_, v), target);
}

Vector DiscreteOperators::discrete_laplacian(const Vector& z) const {
  check_velocity(*space_, z, "discrete_laplacian");
  return solve_saddle(*mass_saddle_lu_, -(stiffness_ * z));
}

Vector DiscreteOperators::ritz_project(const Vector& v) const {
  check_velocity(*space_, v, "ritz_project");
  return solve_saddle(*stiff_saddle_lu_, stiffness_ * v);
}

Vector DiscreteOperators::ritz_project(const GradientFunction& grad_v) const {
  return solve_saddle(*stiff_saddle_lu_, load_velocity_gradient(*space_, grad_v));
}

double alpha_norm(const DiscreteOperators& ops, const Vector& u, double alpha) { return ops.alpha_norm(u, alpha); }

FilterContext::FilterContext(std::shared_ptr<const DiscreteOperators> ops, double alpha)
    : ops_(std::move(ops)), alpha_(alpha) {
  if (!ops_) throw InvalidParameter("FilterContext: null operators");
  // alpha = 0 is accepted here: the filter then reduces to the L2 projection
  // onto the divergence-free subspace.
  if (!(alpha >= 0.0) || alpha > 1.0) throw InvalidParameter("filter alpha must lie in [0, 1]");
  const SparseMatrix a = ops_->mass() + (alpha * alpha) * ops_->stiffness();
  lu_ = std::make_unique<LuFactorization>(
      saddle_matrix(ops_->space(), a, ops_->divergence(), ops_->pressure_mean()));
}

FilterContext::~FilterContext() = default;

FilterResult FilterContext::apply(const Vector& v) const {
  check_velocity(ops_->space(), v, "FilterContext::apply");
  return apply_load(ops_->mass() * v);
}

FilterResult FilterContext::apply_load(const Vector& load) const {
  const MixedSpace& space = ops_->space();
  check_velocity(space, load, "FilterContext::apply_load");
  const Vector x = saddle_solve(space, *lu_, load);
  FilterResult out;
  out.filtered = x.head(space.num_velocity_dofs());
  out.pressure = x.segment(space.num_velocity_dofs(), space.num_pressure_dofs());
  remove_pressure_mean(out.pressure, ops_->pressure_mean());
  return out;
}

}  // namespace slans
