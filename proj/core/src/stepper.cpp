#include "slans/stepper.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "slans/error.hpp"

namespace slans {
namespace {

double alpha_norm_sq(const DiscreteOperators& ops, const Vector& u, double alpha) {
  const double l2 = u.dot(ops.mass() * u);
  return alpha > 0.0 ? l2 + alpha * alpha * u.dot(ops.stiffness() * u) : l2;
}

// Velocity-velocity operator with Dirichlet rows and columns removed (no
// unit diagonal), embedded at (row0, col0) of a size x size matrix.
SparseMatrix embed_velocity_block(const MixedSpace& space, const SparseMatrix& a, double scale, int size, int row0,
                                  int col0) {
  TripletBuffer t(size, size);
  t.reserve(a.nonZeros());
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      if (space.is_dirichlet(it.row()) || space.is_dirichlet(it.col())) continue;
      t.add(row0 + it.row(), col0 + it.col(), scale * it.value());
    }
  }
  return t.compress();
}

struct LinearSolve {
  Vector x;
  double residual = 0.0;
  int iterations = 0;
};

LinearSolve solve_step(const SparseMatrix& a, const Vector& b, const Vector& guess, const StepperOptions& opt,
                       const LuFactorization* preconditioner, int step) {
  LinearSolve out;
  try {
    if (opt.solver == SolverKind::kDirect) {
      LuFactorization lu(a);
      out.x = lu.solve(b);
      out.iterations = 1;
    } else {
      IterativeOptions it;
      it.tol = opt.tol;
      it.max_iter = opt.max_iter;
      it.preconditioner = [preconditioner](const Vector& r) { return preconditioner->solve_raw(r); };
      SolveResult r = solve_iterative(a, b, it, &guess);
      out.x = std::move(r.x);
      out.iterations = r.iterations;
    }
  } catch (const ConvergenceError& e) {
    throw StepFailure(std::string("linear solve failed: ") + e.what(), step);
  } catch (const SingularMatrix& e) {
    throw StepFailure(std::string("linear solve failed: ") + e.what(), step);
  }
  if (!out.x.allFinite()) throw StepFailure("non-finite values in the solution", step);
  out.residual = relative_residual(a, out.x, b);
  return out;
}

}  // namespace

// ---- drift / diffusion ----------------------------------------------------------

DriftDiffusionModel DriftDiffusionModel::zero() { return {}; }

DriftDiffusionModel DriftDiffusionModel::constant_drift(const DiscreteOperators& ops, std::array<double, 2> f) {
  DriftDiffusionModel m;
  if (f[0] == 0.0 && f[1] == 0.0) return m;
  const Vector load = load_velocity(ops.space(), [f](double, double) { return f; }, 2);
  m.drift = [load](double, const Vector&) { return load; };
  m.constants.K1 = f[0] * f[0] + f[1] * f[1];
  return m;
}

DriftDiffusionModel& DriftDiffusionModel::with_additive_noise(std::shared_ptr<const DiscreteOperators> ops,
                                                              double scale) {
  diffusion = [ops, scale](double, const Vector&, const Vector& dW) -> Vector { return scale * (ops->mass() * dW); };
  constants.K3 = scale * scale;
  constants.K4 = 0.0;
  constants.L_g = 0.0;
  return *this;
}

DriftDiffusionModel& DriftDiffusionModel::with_multiplicative_noise(std::shared_ptr<const DiscreteOperators> ops,
                                                                    double scale) {
  diffusion = [ops, scale](double, const Vector& u, const Vector& dW) -> Vector {
    return scale * (ops->mass() * u.cwiseProduct(dW));
  };
  constants.K3 = 0.0;
  constants.K4 = scale * scale;
  constants.L_g = std::abs(scale);
  return *this;
}

DriftDiffusionModel DriftDiffusionModel::from_config(std::shared_ptr<const DiscreteOperators> ops,
                                                     const RunConfig& config) {
  DriftDiffusionModel m = constant_drift(*ops, {config.f_x, config.f_y});
  if (config.g_scale != 0.0) {
    if (config.g_mode == DiffusionMode::kAdditive) m.with_additive_noise(ops, config.g_scale);
    if (config.g_mode == DiffusionMode::kMultiplicative) m.with_multiplicative_noise(ops, config.g_scale);
  }
  return m;
}

// ---- LANS stepper ---------------------------------------------------------------------

LansStepper::LansStepper(std::shared_ptr<const DiscreteOperators> ops, StepperOptions options)
    : ops_(std::move(ops)), options_(options) {
  if (!ops_) throw InvalidParameter("LansStepper: null operators");
  if (!(options_.k > 0.0)) throw InvalidParameter("time step k must be positive");
  if (!(options_.nu > 0.0)) throw InvalidParameter("viscosity nu must be positive");
  if (!(options_.alpha >= 0.0) || options_.alpha > 1.0) throw InvalidParameter("alpha must lie in [0, 1]");
  const MixedSpace& sp = ops_->space();
  const double k = options_.k, a2 = options_.alpha * options_.alpha;
  const SparseMatrix& M = ops_->mass();
  const SparseMatrix& K = ops_->stiffness();
  const SparseMatrix& B = ops_->divergence();
  const SparseMatrix Bt = B.transpose();

  BlockSystem sys;
  const int V = sys.add_field("V", sp.num_velocity_dofs());
  const int U = sys.add_field("U", sp.num_velocity_dofs());
  const int P = sys.add_field("P", sp.num_pressure_dofs());
  const int Pt = sys.add_field("P_tilde", sp.num_pressure_dofs());
  sys.add_block(V, V, M);
  sys.add_block(V, V, K, k * options_.nu);
  sys.add_block(V, P, Bt, -k);
  sys.add_block(U, V, M, -1.0);
  sys.add_block(U, U, M);
  if (a2 > 0.0) sys.add_block(U, U, K, a2);
  sys.add_block(U, Pt, Bt, -1.0);
  sys.add_block(P, V, B, -k);
  sys.add_block(Pt, U, B, -1.0);
  apply_dirichlet(sys, V, sp);
  apply_dirichlet(sys, U, sp);
  pin_pressure(sys, P, sp);
  pin_pressure(sys, Pt, sp);
  base_ = sys.matrix();
  size_ = sys.size();
  layout_ = {sys.field_offset(V), sys.field_offset(U), sys.field_offset(P), sys.field_offset(Pt)};
  if (options_.solver == SolverKind::kIterative) preconditioner_ = std::make_unique<LuFactorization>(base_);
}

LansStepper::~LansStepper() = default;

PathState LansStepper::initial_state(const Vector& U0) const {
  const MixedSpace& sp = ops_->space();
  if (U0.size() != sp.num_velocity_dofs()) throw SpaceMismatch("initial velocity has the wrong length");
  PathState s;
  s.U = U0;
  s.V = U0;
  if (options_.alpha > 0.0) s.V -= options_.alpha * options_.alpha * ops_->discrete_laplacian(U0);
  s.P = Vector::Zero(sp.num_pressure_dofs());
  s.P_tilde = Vector::Zero(sp.num_pressure_dofs());
  s.v_scale = std::max(1.0, ops_->l2_norm(s.V));
  return s;
}

SparseMatrix LansStepper::step_matrix(const Vector& V_old) const {
  if (V_old.size() != ops_->space().num_velocity_dofs()) throw SpaceMismatch("V_old has the wrong length");
  if (V_old.isZero(0.0)) return base_;
  const SparseMatrix C = assemble_convection(ops_->space(), V_old, options_.convection);
  return base_ + embed_velocity_block(ops_->space(), C, options_.k, size_, layout_.V, layout_.U);
}

Vector LansStepper::step_rhs(const PathState& state, const DriftDiffusionModel& model, const Vector& dW) const {
  const MixedSpace& sp = ops_->space();
  const int nv = sp.num_velocity_dofs();
  if (dW.size() != nv) throw SpaceMismatch("noise field has the wrong length");
  Vector f = ops_->mass() * state.V;
  if (model.drift) f += options_.k * model.drift(state.t, state.U);
  if (model.diffusion) f += model.diffusion(state.t, state.U, dW);
  zero_dirichlet(f, sp);
  Vector b = Vector::Zero(size_);
  b.segment(layout_.V, nv) = f;
  return b;
}

PathState LansStepper::step(const PathState& state, const DriftDiffusionModel& model, const Vector& dW,
                            StepDiagnostics* diagnostics) const {
  const auto start = std::chrono::steady_clock::now();
  const MixedSpace& sp = ops_->space();
  const int nv = sp.num_velocity_dofs(), np = sp.num_pressure_dofs();
  const int m = state.step + 1;
  const double k = options_.k, alpha = options_.alpha;

  const SparseMatrix A = step_matrix(state.V);
  const Vector b = step_rhs(state, model, dW);
  Vector guess = Vector::Zero(size_);
  if (options_.solver == SolverKind::kIterative) {
    guess.segment(layout_.V, nv) = state.V;
    guess.segment(layout_.U, nv) = state.U;
    guess.segment(layout_.P, np) = state.P.array() - state.P[0];
    guess.segment(layout_.Pt, np) = state.P_tilde.array() - state.P_tilde[0];
  }
  const LinearSolve sol = solve_step(A, b, guess, options_, preconditioner_.get(), m);

  PathState next;
  next.step = m;
  next.t = state.t + k;
  next.V = sol.x.segment(layout_.V, nv);
  next.U = sol.x.segment(layout_.U, nv);
  next.P = sol.x.segment(layout_.P, np);
  next.P_tilde = sol.x.segment(layout_.Pt, np);
  remove_pressure_mean(next.P, ops_->pressure_mean());
  remove_pressure_mean(next.P_tilde, ops_->pressure_mean());
  next.v_scale = state.v_scale;

  const double norm_v = ops_->l2_norm(next.V);
  if (!std::isfinite(norm_v) || norm_v > options_.blowup_factor * state.v_scale) {
    throw StepFailure("blow-up: ||V||_L2 = " + std::to_string(norm_v), m);
  }
  if (!diagnostics) return next;

  StepDiagnostics& d = *diagnostics;
  d.m = m;
  d.t = next.t;
  d.norm_V_l2 = norm_v;
  const double grad_sq = next.U.dot(ops_->stiffness() * next.U);
  d.norm_grad_U = std::sqrt(std::max(0.0, grad_sq));
  d.norm_U_alpha_sq = alpha_norm_sq(*ops_, next.U, alpha);
  d.norm_U_alpha = std::sqrt(d.norm_U_alpha_sq);
  if (options_.check_filter) {
    const Vector lap = ops_->discrete_laplacian(next.U);
    d.norm_lap_U = ops_->l2_norm(lap);
    d.dissipation = grad_sq + alpha * alpha * d.norm_lap_U * d.norm_lap_U;
    const Vector r = next.V - (next.U - alpha * alpha * lap);
    d.filter_residual = ops_->l2_norm(r) / std::max(norm_v, 1e-300);
  } else {
    // (grad V, grad U) = ||grad U||^2 + alpha^2 ||lap_h U||^2 for the filter pair.
    d.dissipation = next.V.dot(ops_->stiffness() * next.U);
    d.norm_lap_U = alpha > 0.0 ? std::sqrt(std::max(0.0, d.dissipation - grad_sq)) / alpha : 0.0;
  }
  d.div_residual_U = ops_->divergence_residual(next.U);
  d.div_residual_V = ops_->divergence_residual(next.V);
  d.solver_residual = sol.residual;
  d.solver_iterations = sol.iterations;
  d.jump_alpha_sq = alpha_norm_sq(*ops_, next.U - state.U, alpha);

  const double e_new = 0.5 * d.norm_U_alpha_sq;
  const double e_old = 0.5 * alpha_norm_sq(*ops_, state.U, alpha);
  const double jump = 0.5 * d.jump_alpha_sq;
  const double diss = k * options_.nu * d.dissipation;
  double work = 0.0;
  if (model.drift) work += k * model.drift(state.t, state.U).dot(next.U);
  if (model.diffusion) work += model.diffusion(state.t, state.U, dW).dot(next.U);
  const double scale = std::max({e_new, e_old, jump, diss, std::abs(work), 1e-300});
  d.energy_defect = std::abs(e_new - e_old + jump + diss - work) / scale;
  d.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return next;
}

// ---- NSE stepper -------------------------------------------------------------------------

NseStepper::NseStepper(std::shared_ptr<const DiscreteOperators> ops, StepperOptions options, bool lans_convection)
    : ops_(std::move(ops)), options_(options), lans_convection_(lans_convection) {
  if (!ops_) throw InvalidParameter("NseStepper: null operators");
  if (!(options_.k > 0.0)) throw InvalidParameter("time step k must be positive");
  if (!(options_.nu > 0.0)) throw InvalidParameter("viscosity nu must be positive");
  const MixedSpace& sp = ops_->space();
  nv_ = sp.num_velocity_dofs();
  np_ = sp.num_pressure_dofs();
  BlockSystem sys;
  const int v = sys.add_field("v", nv_);
  const int p = sys.add_field("lambda", np_);
  sys.add_block(v, v, ops_->mass());
  sys.add_block(v, v, ops_->stiffness(), options_.k * options_.nu);
  sys.add_block(v, p, SparseMatrix(ops_->divergence().transpose()), -options_.k);
  sys.add_block(p, v, ops_->divergence(), -options_.k);
  apply_dirichlet(sys, v, sp);
  pin_pressure(sys, p, sp);
  base_ = sys.matrix();
  size_ = sys.size();
  if (options_.solver == SolverKind::kIterative) preconditioner_ = std::make_unique<LuFactorization>(base_);
}

NseStepper::~NseStepper() = default;

PathState NseStepper::initial_state(const Vector& v0) const {
  if (v0.size() != nv_) throw SpaceMismatch("initial velocity has the wrong length");
  PathState s;
  s.V = v0;
  s.U = v0;
  s.P = Vector::Zero(np_);
  s.P_tilde = Vector::Zero(np_);
  s.v_scale = std::max(1.0, ops_->l2_norm(v0));
  return s;
}

PathState NseStepper::step(const PathState& state, const DriftDiffusionModel& model, const Vector& dW,
                           StepDiagnostics* diagnostics) const {
  const auto start = std::chrono::steady_clock::now();
  const MixedSpace& sp = ops_->space();
  const int m = state.step + 1;
  const double k = options_.k;
  if (dW.size() != nv_) throw SpaceMismatch("noise field has the wrong length");

  SparseMatrix A = base_;
  if (!state.V.isZero(0.0)) {
    const SparseMatrix N = lans_convection_ ? assemble_convection(sp, state.V, options_.convection)
                                            : assemble_transport_skew(sp, state.V);
    A += embed_velocity_block(sp, N, k, size_, 0, 0);
  }
  Vector f = ops_->mass() * state.V;
  Vector work_load = Vector::Zero(nv_);
  if (model.drift) work_load += k * model.drift(state.t, state.V);
  if (model.diffusion) work_load += model.diffusion(state.t, state.V, dW);
  f += work_load;
  zero_dirichlet(f, sp);
  Vector b = Vector::Zero(size_);
  b.head(nv_) = f;
  Vector guess = Vector::Zero(size_);
  if (options_.solver == SolverKind::kIterative) {
    guess.head(nv_) = state.V;
    guess.segment(nv_, np_) = state.P.array() - state.P[0];
  }
  const LinearSolve sol = solve_step(A, b, guess, options_, preconditioner_.get(), m);

  PathState next;
  next.step = m;
  next.t = state.t + k;
  next.V = sol.x.head(nv_);
  next.U = next.V;
  next.P = sol.x.segment(nv_, np_);
  remove_pressure_mean(next.P, ops_->pressure_mean());
  next.P_tilde = Vector::Zero(np_);
  next.v_scale = state.v_scale;
  const double norm_v = ops_->l2_norm(next.V);
  if (!std::isfinite(norm_v) || norm_v > options_.blowup_factor * state.v_scale) {
    throw StepFailure("blow-up: ||v||_L2 = " + std::to_string(norm_v), m);
  }
  if (!diagnostics) return next;

  StepDiagnostics& d = *diagnostics;
  d.m = m;
  d.t = next.t;
  d.norm_V_l2 = norm_v;
  d.norm_U_alpha_sq = norm_v * norm_v;
  d.norm_U_alpha = norm_v;
  const double grad_sq = next.V.dot(ops_->stiffness() * next.V);
  d.norm_grad_U = std::sqrt(std::max(0.0, grad_sq));
  d.dissipation = grad_sq;
  d.div_residual_U = d.div_residual_V = ops_->divergence_residual(next.V);
  d.solver_residual = sol.residual;
  d.solver_iterations = sol.iterations;
  d.jump_alpha_sq = alpha_norm_sq(*ops_, next.V - state.V, 0.0);
  const double e_new = 0.5 * d.norm_U_alpha_sq;
  const double e_old = 0.5 * alpha_norm_sq(*ops_, state.V, 0.0);
  const double jump = 0.5 * d.jump_alpha_sq;
  const double diss = k * options_.nu * grad_sq;
  const double work = work_load.dot(next.V);
  const double scale = std::max({e_new, e_old, jump, diss, std::abs(work), 1e-300});
  d.energy_defect = std::abs(e_new - e_old + jump + diss - work) / scale;
  d.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return next;
}

// ---- paths ------------------------------------------------------------------------------

std::array<double, 2> vortex_field(double x, double y) {
  const double pi = std::numbers::pi;
  const double sx = std::sin(pi * x), sy = std::sin(pi * y);
  return {sx * sx * std::sin(2 * pi * y), -std::sin(2 * pi * x) * sy * sy};
}

std::array<double, 4> vortex_gradient(double x, double y) {
  const double pi = std::numbers::pi;
  const double sx = std::sin(pi * x), sy = std::sin(pi * y);
  const double s2x = std::sin(2 * pi * x), s2y = std::sin(2 * pi * y);
  const double c2x = std::cos(2 * pi * x), c2y = std::cos(2 * pi * y);
  // d/dx sin^2(pi x) = pi sin(2 pi x)
  return {pi * s2x * s2y, 2 * pi * sx * sx * c2y, -2 * pi * c2x * sy * sy, -pi * s2x * s2y};
}

PathContext PathContext::build(const RunConfig& config) {
  return build(config, std::make_shared<const Mesh>(triangulate_unit_square(config.n)));
}

PathContext PathContext::build(const RunConfig& config, std::shared_ptr<const Mesh> mesh) {
  PathContext c;
  c.mesh = std::move(mesh);
  c.space = MixedSpace::taylor_hood(c.mesh);
  c.ops = std::make_shared<const DiscreteOperators>(c.space);
  c.noise = NoiseModel(config.noise_M, config.seed);
  c.realizer = std::make_shared<const NoiseRealizer>(c.space, config.noise_M, config.noise_realization, c.ops);
  c.model = DriftDiffusionModel::from_config(c.ops, config);
  c.options.k = config.k;
  c.options.nu = config.nu;
  c.options.alpha = config.alpha_rule == AlphaRule::kConstant ? config.alpha : config.alpha_c * c.mesh->h_max();
  c.options.convection = config.convection;
  c.options.solver = config.solver;
  c.options.tol = config.tol;
  c.options.max_iter = config.max_iter;
  c.options.check_filter = config.check_filter;
  c.num_steps = config.num_steps();
  if (config.initial == InitialCondition::kVortex) {
    const double s = config.initial_scale;
    c.U0 = s * c.ops->ritz_project(GradientFunction(vortex_gradient));
  } else {
    c.U0 = Vector::Zero(c.space->num_velocity_dofs());
  }
  c.lans = std::make_shared<const LansStepper>(c.ops, c.options);
  c.nse = std::make_shared<const NseStepper>(c.ops, c.options);
  return c;
}

Trajectory run_path(const PathContext& context, Model model, std::uint64_t path_id, int stride,
                    const StepObserver& observer, int substeps) {
  if (stride < 1) throw InvalidParameter("stride must be >= 1");
  const IncrementSampler sampler(context.noise, path_id, substeps);
  const bool lans = model == Model::kLans;
  Trajectory traj;
  PathState state = lans ? context.lans->initial_state(context.U0) : context.nse->initial_state(context.U0);
  traj.states.push_back(state);
  traj.diagnostics.reserve(context.num_steps);
  try {
    for (int m = 1; m <= context.num_steps; ++m) {
      const WienerIncrement inc = sampler.sample(m, context.options.k);
      const Vector dW = context.model.diffusion ? context.realizer->realize(inc)
                                                : Vector::Zero(context.space->num_velocity_dofs());
      StepDiagnostics d;
      state = lans ? context.lans->step(state, context.model, dW, &d) : context.nse->step(state, context.model, dW, &d);
      d.increment_norm_squared = inc.norm_squared();
      d.increment_checksum = inc.checksum();
      traj.diagnostics.push_back(d);
      if (m % stride == 0 || m == context.num_steps) traj.states.push_back(state);
      if (observer) observer(state, d);
    }
    traj.completed = true;
  } catch (const StepFailure& e) {
    traj.error = e.what();
    traj.failed_step = e.step();
  } catch (const Error& e) {
    traj.error = e.what();
    traj.failed_step = state.step + 1;
  }
  return traj;
}

Trajectory run_path(const RunConfig& config, Model model, std::uint64_t path_id) {
  const PathContext context = PathContext::build(config);
  return run_path(context, model, path_id, config.stride);
}

}  // namespace slans
