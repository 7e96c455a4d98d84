#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "slans/error.hpp"
#include "slans/stepper.hpp"

using namespace slans;

namespace {

struct Fixture {
  std::shared_ptr<const MixedSpace> space;
  std::shared_ptr<const DiscreteOperators> ops;
  DenseMatrix Z;
  DenseMatrix lap;  // dense discrete Laplacian on the divergence-free subspace

  explicit Fixture(int n) {
    space = MixedSpace::taylor_hood(std::make_shared<const Mesh>(triangulate_unit_square(n)));
    ops = std::make_shared<const DiscreteOperators>(space);
    Z = oracle::divergence_free_basis(*space);
    const DenseMatrix M = DenseMatrix(ops->mass()), K = DenseMatrix(ops->stiffness());
    lap = -Z * (Z.transpose() * M * Z).ldlt().solve(Z.transpose() * K);
  }

  Vector vortex(double scale) const {
    return scale * ops->l2_project(vortex_field, ProjectionTarget::kDivergenceFree);
  }

  double alpha_sq(const Vector& u, double alpha) const {
    return oracle::l2_sq(*space, u) + alpha * alpha * (u.dot(ops->stiffness() * u));
  }
};

StepperOptions options(double k, double alpha, SolverKind solver = SolverKind::kDirect) {
  StepperOptions o;
  o.k = k;
  o.alpha = alpha;
  o.solver = solver;
  return o;
}

}  // namespace

TEST(Lans, ZeroStaysZero) {
  const Fixture fx(3);
  const LansStepper st(fx.ops, options(0.01, 0.5));
  const Vector zero = Vector::Zero(fx.space->num_velocity_dofs());
  PathState s = st.initial_state(zero);
  for (int m = 0; m < 5; ++m) s = st.step(s, DriftDiffusionModel::zero(), zero);
  EXPECT_EQ(s.U.norm(), 0.0);
  EXPECT_EQ(s.V.norm(), 0.0);
  EXPECT_EQ(s.step, 5);
  EXPECT_NEAR(s.t, 0.05, 1e-15);
}

TEST(Lans, InitialStateSatisfiesFilterRelation) {
  const Fixture fx(4);
  const double alpha = 0.3;
  const LansStepper st(fx.ops, options(0.01, alpha));
  const Vector U0 = fx.vortex(1.0);
  const PathState s = st.initial_state(U0);
  const Vector expected = U0 - alpha * alpha * fx.lap * U0;
  EXPECT_LE((s.V - expected).norm(), 1e-10 * expected.norm());
}

TEST(Lans, EnergyIdentityUnforced) {
  const Fixture fx(4);
  const Vector zero = Vector::Zero(fx.space->num_velocity_dofs());
  for (double alpha : {1.0, 0.3}) {
    const double k = 0.01;
    const LansStepper st(fx.ops, options(k, alpha));
    PathState s = st.initial_state(fx.vortex(20.0));
    double prev = fx.alpha_sq(s.U, alpha);
    for (int m = 1; m <= 20; ++m) {
      StepDiagnostics d;
      const PathState next = st.step(s, DriftDiffusionModel::zero(), zero, &d);
      const double cur = fx.alpha_sq(next.U, alpha);
      const double jump = fx.alpha_sq(Vector(next.U - s.U), alpha);
      const Vector lapU = fx.lap * next.U;
      const double diss = next.U.dot(fx.ops->stiffness() * next.U) + alpha * alpha * oracle::l2_sq(*fx.space, lapU);
      const double lhs = cur - prev + jump + 2 * k * diss;
      EXPECT_LE(std::abs(lhs), 1e-8 * std::max({prev, cur, 1e-300})) << "alpha=" << alpha << " m=" << m;
      EXPECT_LE(cur, prev * (1 + 1e-12));
      EXPECT_LE(std::abs(d.energy_defect), 1e-9);
      prev = cur;
      s = next;
    }
  }
}

TEST(Nse, EnergyIdentityUnforced) {
  const Fixture fx(4);
  const Vector zero = Vector::Zero(fx.space->num_velocity_dofs());
  const double k = 0.01;
  const NseStepper st(fx.ops, options(k, 0.0));
  PathState s = st.initial_state(fx.vortex(20.0));
  for (int m = 1; m <= 20; ++m) {
    const PathState next = st.step(s, DriftDiffusionModel::zero(), zero);
    const double prev = oracle::l2_sq(*fx.space, s.V), cur = oracle::l2_sq(*fx.space, next.V);
    const double jump = oracle::l2_sq(*fx.space, Vector(next.V - s.V));
    const double lhs = cur - prev + jump + 2 * k * next.V.dot(fx.ops->stiffness() * next.V);
    EXPECT_LE(std::abs(lhs), 1e-9 * prev);
    EXPECT_LE(fx.ops->divergence_residual(next.V), 1e-12);
    s = next;
  }
}

TEST(Lans, StepIsDeterministicAndSolversAgree) {
  const Fixture fx(4);
  auto model = DriftDiffusionModel::zero().with_additive_noise(fx.ops, 1.0);
  const NoiseRealizer realizer(fx.space, 4);
  const Vector dW = realizer.realize(sample_increment(NoiseModel(4, 3), 1, 0.01));
  const LansStepper direct(fx.ops, options(0.01, 0.5));
  const LansStepper iter(fx.ops, options(0.01, 0.5, SolverKind::kIterative));
  const PathState s0 = direct.initial_state(fx.vortex(5.0));
  const PathState a = direct.step(s0, model, dW), b = direct.step(s0, model, dW);
  EXPECT_EQ(a.U, b.U);
  EXPECT_EQ(a.V, b.V);
  EXPECT_EQ(a.P, b.P);
  const PathState c = iter.step(s0, model, dW);
  EXPECT_LE((a.U - c.U).norm(), 1e-10 * a.U.norm());
  EXPECT_LE((a.V - c.V).norm(), 1e-10 * a.V.norm());
}

TEST(Lans, ResidualAndDivergenceAudit) {
  const Fixture fx(4);
  auto model = DriftDiffusionModel::constant_drift(*fx.ops, {0.0, 3.0}).with_additive_noise(fx.ops, 1.0);
  const NoiseRealizer realizer(fx.space, 4);
  const Vector dW = realizer.realize(sample_increment(NoiseModel(4, 3), 1, 0.01));
  const LansStepper st(fx.ops, options(0.01, 0.5));
  const PathState s0 = st.initial_state(fx.vortex(2.0));
  StepDiagnostics d;
  const PathState s1 = st.step(s0, model, dW, &d);
  EXPECT_LE(d.solver_residual, 1e-10);
  EXPECT_LE(d.div_residual_U, 1e-10);
  EXPECT_LE(d.div_residual_V, 1e-10);
  EXPECT_LE(fx.ops->divergence_residual(s1.U), 1e-10);
  // The assembled system, with the pressure shifted back to the pinned gauge.
  const int nv = fx.space->num_velocity_dofs(), np = fx.space->num_pressure_dofs();
  Vector x(st.num_unknowns());
  x << s1.V, s1.U, Vector(s1.P.array() - s1.P[0]), Vector(s1.P_tilde.array() - s1.P_tilde[0]);
  ASSERT_EQ(x.size(), 2 * nv + 2 * np);
  const Vector b = st.step_rhs(s0, model, dW);
  EXPECT_LE((st.step_matrix(s0.V) * x - b).norm(), 1e-9 * b.norm());
}

TEST(Lans, FilterIdentityAlongPath) {
  const Fixture fx(4);
  StepperOptions o = options(0.01, 0.4);
  o.check_filter = true;
  const LansStepper st(fx.ops, o);
  auto model = DriftDiffusionModel::zero().with_additive_noise(fx.ops, 1.0);
  const NoiseRealizer realizer(fx.space, 3);
  const IncrementSampler sampler(NoiseModel(3, 1), 0);
  PathState s = st.initial_state(fx.vortex(1.0));
  for (int m = 1; m <= 5; ++m) {
    StepDiagnostics d;
    s = st.step(s, model, realizer.realize(sampler.sample(m, 0.01)), &d);
    EXPECT_LE(d.filter_residual, 1e-9);
    const Vector expected = s.U - 0.16 * fx.lap * s.U;
    EXPECT_LE((s.V - expected).norm(), 1e-9 * s.V.norm());
  }
}

TEST(Lans, ZeroAlphaMatchesNseWithLansTransport) {
  const Fixture fx(4);
  auto model = DriftDiffusionModel::zero().with_additive_noise(fx.ops, 1.0);
  const NoiseRealizer realizer(fx.space, 3);
  const IncrementSampler sampler(NoiseModel(3, 2), 0);
  const LansStepper lans(fx.ops, options(0.01, 0.0));
  const NseStepper nse(fx.ops, options(0.01, 0.0), true);
  PathState a = lans.initial_state(fx.vortex(3.0)), b = nse.initial_state(fx.vortex(3.0));
  for (int m = 1; m <= 5; ++m) {
    const Vector dW = realizer.realize(sampler.sample(m, 0.01));
    a = lans.step(a, model, dW);
    b = nse.step(b, model, dW);
    EXPECT_LE((a.V - b.V).norm(), 1e-10 * b.V.norm());
  }
}

TEST(Lans, BlowUpAndNonFiniteInputsFail) {
  const Fixture fx(3);
  StepperOptions o = options(0.01, 0.5);
  o.blowup_factor = 10.0;
  const LansStepper st(fx.ops, o);
  auto loud = DriftDiffusionModel::zero().with_additive_noise(fx.ops, 1e6);
  const NoiseRealizer realizer(fx.space, 3);
  const Vector dW = realizer.realize(sample_increment(NoiseModel(3, 1), 1, 0.01));
  PathState s = st.initial_state(Vector::Zero(fx.space->num_velocity_dofs()));
  try {
    st.step(s, loud, dW);
    FAIL() << "expected StepFailure";
  } catch (const StepFailure& e) {
    EXPECT_EQ(e.step(), 1);
  }
  s.V[s.V.size() / 2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(st.step(s, DriftDiffusionModel::zero(), Vector::Zero(dW.size())), StepFailure);
}

TEST(Lans, ConstantForcingIsAbsorbedByPressure) {
  const Fixture fx(4);
  const LansStepper st(fx.ops, options(0.01, 0.5));
  const Vector zero = Vector::Zero(fx.space->num_velocity_dofs());
  PathState s = st.initial_state(zero);
  s = st.step(s, DriftDiffusionModel::constant_drift(*fx.ops, {1.0, 0.0}), zero);
  EXPECT_LE(s.U.norm(), 1e-12);
  EXPECT_GT(s.P.norm(), 0.0);
}

TEST(RunPath, TrajectoryShapeAndDeterminism) {
  RunConfig c;
  c.n = 4;
  c.T = 0.05;
  c.k = 0.01;
  c.alpha_rule = AlphaRule::kConstant;
  c.alpha = 0.5;
  c.noise_M = 3;
  c.initial = InitialCondition::kVortex;
  const PathContext ctx = PathContext::build(c);
  EXPECT_EQ(ctx.num_steps, 5);
  int seen = 0;
  const Trajectory a = run_path(ctx, Model::kLans, 0, 2, [&](const PathState&, const StepDiagnostics&) { ++seen; });
  ASSERT_TRUE(a.completed) << a.error;
  EXPECT_EQ(seen, 5);
  EXPECT_EQ(a.diagnostics.size(), 5u);
  EXPECT_EQ(a.states.front().step, 0);
  EXPECT_EQ(a.states.back().step, 5);
  const Trajectory b = run_path(ctx, Model::kLans, 0, 2);
  EXPECT_EQ(a.states.back().U, b.states.back().U);
  for (std::size_t m = 0; m < a.diagnostics.size(); ++m) {
    EXPECT_EQ(a.diagnostics[m].increment_checksum, b.diagnostics[m].increment_checksum);
  }
  const Trajectory other = run_path(ctx, Model::kLans, 1, 2);
  EXPECT_NE(a.states.back().U, other.states.back().U);
  // Both models consume the same increments.
  const Trajectory nse = run_path(ctx, Model::kNse, 0, 2);
  ASSERT_TRUE(nse.completed);
  for (std::size_t m = 0; m < a.diagnostics.size(); ++m) {
    EXPECT_EQ(a.diagnostics[m].increment_checksum, nse.diagnostics[m].increment_checksum);
  }
}

TEST(RunPath, FixedAlphaParabolicStepCompletes) {
  RunConfig c;
  c.n = 8;
  c.alpha_rule = AlphaRule::kConstant;
  c.alpha = 1.0;
  c.k = 0.9 * std::pow(std::sqrt(2.0) / 8, 2);
  c.T = 8 * c.k;
  c.noise_M = 5;
  c.regime = Regime::kAlphaFixed;
  EXPECT_NO_THROW(validate_config(c));
  const Trajectory t = run_path(c, Model::kLans, 0);
  EXPECT_TRUE(t.completed) << t.error;
  EXPECT_EQ(t.diagnostics.size(), 8u);
  for (const auto& d : t.diagnostics) EXPECT_TRUE(std::isfinite(d.norm_U_alpha));
}
