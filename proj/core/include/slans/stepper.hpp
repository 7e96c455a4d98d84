#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slans/config.hpp"
#include "slans/fem.hpp"
#include "slans/noise.hpp"
#include "slans/operators.hpp"

namespace slans {

/// Nominal constants of the sublinear/Lipschitz bounds on f and g, recorded
/// for diagnostics only.
struct GrowthConstants {
  double K1 = 0.0, K2 = 0.0, K3 = 0.0, K4 = 0.0, L_f = 0.0, L_g = 0.0;
};

/// Drift and diffusion as callables returning load vectors:
///   drift(t, u)         -> <f(t, u), phi_i>
///   diffusion(t, u, dW) -> (g(t, u) dW, phi_i)
/// Empty callables mean zero.
struct DriftDiffusionModel {
  std::function<Vector(double, const Vector&)> drift;
  std::function<Vector(double, const Vector&, const Vector&)> diffusion;
  GrowthConstants constants;

  static DriftDiffusionModel zero();
  /// f = (fx, fy) constant.
  static DriftDiffusionModel constant_drift(const DiscreteOperators& ops, std::array<double, 2> f);
  /// Adds g(t,u) dW = scale * dW.
  DriftDiffusionModel& with_additive_noise(std::shared_ptr<const DiscreteOperators> ops, double scale);
  /// Adds g(t,u) dW = scale * (u (.) dW), a nodal pointwise product.
  DriftDiffusionModel& with_multiplicative_noise(std::shared_ptr<const DiscreteOperators> ops, double scale);

  static DriftDiffusionModel from_config(std::shared_ptr<const DiscreteOperators> ops, const RunConfig& config);
};

struct StepperOptions {
  double k = 1e-3;
  double nu = 1.0;
  /// LANS only. alpha = 0 degenerates the filter to the identity.
  double alpha = 1.0;
  ConvectionForm convection = ConvectionForm::kSkew;
  SolverKind solver = SolverKind::kDirect;
  double tol = 1e-12;
  int max_iter = 200;
  /// Computes ||lap_h U|| by an independent solve and the filter-identity
  /// residual every step.
  bool check_filter = false;
  /// Abort when ||V||_L2 exceeds this multiple of max(initial, 1).
  double blowup_factor = 1e6;
};

/// Iterates of one path.
struct PathState {
  int step = 0;
  double t = 0.0;
  Vector U;        // filtered velocity
  Vector V;        // unfiltered velocity
  Vector P;        // pressure of the momentum equation
  Vector P_tilde;  // pressure of the filter
  /// Reference magnitude for the blow-up guard: max(1, ||V^0||).
  double v_scale = 1.0;
};

struct StepDiagnostics {
  int m = 0;
  double t = 0.0;
  double norm_U_alpha = 0.0;
  double norm_V_l2 = 0.0;
  double norm_grad_U = 0.0;
  /// ||lap_h U||; from an independent solve when check_filter is set,
  /// otherwise from the filter relation.
  double norm_lap_U = 0.0;
  double div_residual_U = 0.0;
  double div_residual_V = 0.0;
  double solver_residual = 0.0;
  int solver_iterations = 0;
  /// Left side minus right side of the discrete energy balance obtained by
  /// testing with U^m, relative to the largest term.
  double energy_defect = 0.0;
  double filter_residual = 0.0;  // ||V - (U - alpha^2 lap_h U)|| / ||V||, if checked
  double increment_norm_squared = 0.0;
  std::uint64_t increment_checksum = 0;
  double wall_time = 0.0;
  // Per-step terms of the a priori statistics.
  double norm_U_alpha_sq = 0.0;
  double dissipation = 0.0;         // ||grad U||^2 + alpha^2 ||lap_h U||^2
  double jump_alpha_sq = 0.0;       // ||U^m - U^{m-1}||_alpha^2
};

/// One semi-implicit Euler step of the stochastic LANS-alpha scheme as a
/// monolithic linear solve in (V, U, P, P_tilde):
///
///   (V - V_old, phi) + k nu (grad V, grad phi) + k b(U, V_old, phi) - k (P, div phi)
///       = k <f, phi> + (g dW, phi)
///   (V, psi) = (U, psi) + alpha^2 (grad U, grad psi) - (P_tilde, div psi)
///   (div U, q1) = (div V, q2) = 0
///
/// V_old enters only as data, so the system is linear. Everything except
/// the convection block is assembled once.
class LansStepper {
 public:
  LansStepper(std::shared_ptr<const DiscreteOperators> ops, StepperOptions options);
  ~LansStepper();

  const StepperOptions& options() const { return options_; }
  const DiscreteOperators& operators() const { return *ops_; }

  /// State at m = 0 from a discretely divergence-free U0; V0 = U0 - alpha^2 lap_h U0.
  PathState initial_state(const Vector& U0) const;

  /// Advances one step. `dW` is the realized increment of this step only.
  /// Throws StepFailure on solver failure, NaN, or blow-up.
  PathState step(const PathState& state, const DriftDiffusionModel& model, const Vector& dW,
                 StepDiagnostics* diagnostics = nullptr) const;

  /// Assembled step matrix and right-hand side (for residual audits).
  SparseMatrix step_matrix(const Vector& V_old) const;
  Vector step_rhs(const PathState& state, const DriftDiffusionModel& model, const Vector& dW) const;

  int num_unknowns() const { return size_; }

 private:
  struct Layout {
    int V = 0, U = 0, P = 0, Pt = 0;
  };

  std::shared_ptr<const DiscreteOperators> ops_;
  StepperOptions options_;
  Layout layout_;
  int size_ = 0;
  SparseMatrix base_;  // constant part, constraints applied
  std::unique_ptr<LuFactorization> preconditioner_;  // iterative mode
};

/// Reference semi-implicit Euler scheme for stochastic Navier-Stokes:
///   (v - v_old, phi) + k nu (grad v, grad phi) + k b_skew(v_old, v, phi)
///       - k (lambda, div phi) = k <f, phi> + (g dW, phi),   (div v, q) = 0.
/// With `lans_convection` the transport term is replaced by the LANS form
/// b(v, v_old, phi), which makes it the alpha = 0 limit of LansStepper.
class NseStepper {
 public:
  NseStepper(std::shared_ptr<const DiscreteOperators> ops, StepperOptions options,
             bool lans_convection = false);
  ~NseStepper();

  const DiscreteOperators& operators() const { return *ops_; }

  /// The pressure slots P_tilde and U are unused; U mirrors V.
  PathState initial_state(const Vector& v0) const;
  PathState step(const PathState& state, const DriftDiffusionModel& model, const Vector& dW,
                 StepDiagnostics* diagnostics = nullptr) const;

 private:
  std::shared_ptr<const DiscreteOperators> ops_;
  StepperOptions options_;
  bool lans_convection_;
  int nv_ = 0, np_ = 0, size_ = 0;
  SparseMatrix base_;
  std::unique_ptr<LuFactorization> preconditioner_;
};

enum class Model { kLans, kNse };

struct Trajectory {
  std::vector<PathState> states;  // m = 0, every stride-th step, and the last
  std::vector<StepDiagnostics> diagnostics;  // m = 1..completed
  bool completed = false;
  std::string error;
  int failed_step = -1;
};

/// Everything a path needs on one mesh. Built once per (config, mesh) and
/// shared by concurrent paths.
struct PathContext {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const MixedSpace> space;
  std::shared_ptr<const DiscreteOperators> ops;
  std::shared_ptr<const NoiseRealizer> realizer;
  DriftDiffusionModel model;
  StepperOptions options;
  NoiseModel noise;
  int num_steps = 0;
  Vector U0;
  std::shared_ptr<const LansStepper> lans;
  std::shared_ptr<const NseStepper> nse;

  static PathContext build(const RunConfig& config);
  static PathContext build(const RunConfig& config, std::shared_ptr<const Mesh> mesh);
};

using StepObserver = std::function<void(const PathState&, const StepDiagnostics&)>;

/// Runs steps 1..num_steps of one path. Deterministic in (context, path_id).
/// Never throws on step failure: returns the partial trajectory instead.
Trajectory run_path(const PathContext& context, Model model, std::uint64_t path_id, int stride,
                    const StepObserver& observer = {}, int substeps = 1);
Trajectory run_path(const RunConfig& config, Model model, std::uint64_t path_id);

/// Analytic divergence-free field (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y)).
std::array<double, 2> vortex_field(double x, double y);
std::array<double, 4> vortex_gradient(double x, double y);

}  // namespace slans
