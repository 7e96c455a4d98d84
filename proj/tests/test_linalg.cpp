#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "slans/error.hpp"
#include "slans/fem.hpp"
#include "slans/linalg.hpp"
#include "slans/mesh.hpp"
#include "slans/operators.hpp"

using namespace slans;

namespace {

SparseMatrix from_dense(const DenseMatrix& d) { return d.sparseView(); }

double recomputed_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double nb = b.norm();
  return nb > 0.0 ? (a * x - b).norm() / nb : (a * x - b).norm();
}

SparseMatrix random_diag_dominant(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix d(n, n);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      d(i, j) = i == j ? 0.0 : u(rng);
      row += std::abs(d(i, j));
    }
    d(i, i) = row + 1.0;
  }
  return from_dense(d);
}

}  // namespace

TEST(Triplets, DuplicatesSummedAndZerosPurged) {
  TripletBuffer t(3, 3);
  t.add(0, 0, 1.0);
  t.add(0, 0, 2.0);
  t.add(1, 2, 5.0);
  t.add(1, 2, -5.0);
  t.add(2, 1, 1e-301);
  const SparseMatrix a = t.compress();
  EXPECT_EQ(a.nonZeros(), 1);
  EXPECT_EQ(a.coeff(0, 0), 3.0);
}

TEST(Triplets, AppendConcatenates) {
  TripletBuffer a(2, 2), b(2, 2);
  a.add(0, 0, 1.0);
  b.add(0, 0, 1.0);
  b.add(1, 1, 4.0);
  a.append(b);
  const SparseMatrix m = a.compress();
  EXPECT_EQ(m.coeff(0, 0), 2.0);
  EXPECT_EQ(m.coeff(1, 1), 4.0);
}

TEST(Sparse, SymmetryCheck) {
  DenseMatrix d(2, 2);
  d << 2, 1, 1, 2;
  EXPECT_TRUE(is_symmetric(from_dense(d)));
  d(0, 1) = 1.0 + 1e-9;
  EXPECT_FALSE(is_symmetric(from_dense(d)));
  EXPECT_FALSE(is_symmetric(SparseMatrix(2, 3)));
}

TEST(Direct, IdentitySystem) {
  SparseMatrix eye(4, 4);
  eye.setIdentity();
  Vector b = Vector::Zero(4);
  b[0] = 1.0;
  const SolveResult r = solve_direct(eye, b);
  EXPECT_EQ(r.x, b);
}

TEST(Direct, TwoByTwo) {
  DenseMatrix d(2, 2);
  d << 2, 1, 1, 2;
  const SolveResult r = solve_direct(from_dense(d), Vector::Constant(2, 3.0));
  EXPECT_NEAR(r.x[0], 1.0, 1e-15);
  EXPECT_NEAR(r.x[1], 1.0, 1e-15);
}

TEST(Direct, StokesSystemOnSmallMesh) {
  auto mesh = std::make_shared<const Mesh>(triangulate_unit_square(2));
  auto space = MixedSpace::taylor_hood(mesh);
  BlockSystem sys;
  const int u = sys.add_field("u", space->num_velocity_dofs());
  const int p = sys.add_field("p", space->num_pressure_dofs());
  const SparseMatrix B = assemble_divergence(*space);
  sys.add_block(u, u, assemble_stiffness(*space));
  sys.add_block(u, p, SparseMatrix(B.transpose()), -1.0);
  sys.add_block(p, u, B, -1.0);
  sys.rhs_segment(u) = load_velocity(*space, [](double x, double y) -> std::array<double, 2> {
    return {std::sin(3 * x) * y, x * x - y};
  });
  apply_dirichlet(sys, u, *space);
  pin_pressure(sys, p, *space);
  const SolveResult r = solve_direct(sys);
  EXPECT_LE(r.residual, 1e-10);
  EXPECT_NEAR(r.residual, recomputed_residual(sys.matrix(), r.x, sys.constrained_rhs()), 1e-14);
}

TEST(Direct, StructurallySingularReportsPivot) {
  DenseMatrix d = DenseMatrix::Identity(3, 3);
  d(1, 1) = 0.0;
  d(0, 1) = 0.0;
  try {
    solve_direct(from_dense(d), Vector::Ones(3));
    FAIL() << "expected SingularMatrix";
  } catch (const SingularMatrix& e) {
    EXPECT_EQ(e.pivot(), 1);
    EXPECT_EQ(e.kind(), "singular-matrix");
  }
}

TEST(Direct, NumericallySingular) {
  DenseMatrix d(2, 2);
  d << 1, 1, 1, 1;
  EXPECT_THROW(solve_direct(from_dense(d), Vector::Ones(2)), SingularMatrix);
}

TEST(Direct, DimensionMismatch) {
  SparseMatrix eye(3, 3);
  eye.setIdentity();
  EXPECT_THROW(solve_direct(eye, Vector::Ones(2)), DimensionMismatch);
  EXPECT_THROW(solve_direct(SparseMatrix(2, 3), Vector::Ones(2)), DimensionMismatch);
}

TEST(Direct, FactorizationReusableAndRefined) {
  std::mt19937_64 rng(7);
  const SparseMatrix a = random_diag_dominant(30, rng);
  const LuFactorization lu(a);
  for (int k = 0; k < 3; ++k) {
    Vector b = Vector::Random(30);
    EXPECT_LE(recomputed_residual(a, lu.solve(b), b), 1e-14);
  }
}

TEST(Iterative, PoissonMatchesDirect) {
  auto mesh = std::make_shared<const Mesh>(triangulate_unit_square(6));
  const ScalarSpace space(mesh, 2);
  BlockSystem sys;
  const int u = sys.add_field("u", space.num_dofs());
  sys.add_block(u, u, assemble_scalar_stiffness(space));
  sys.rhs_segment(u) = load_scalar(space, [](double x, double y) { return 1.0 + x * y; });
  apply_dirichlet(sys, u, space);
  const double tol = 1e-11;
  const SolveResult direct = solve_direct(sys);
  const SolveResult iter = solve_iterative(sys, tol, 2000);
  EXPECT_TRUE(iter.converged);
  EXPECT_LE(iter.residual, tol);
  EXPECT_LE((direct.x - iter.x).norm() / direct.x.norm(), 10 * tol * 1e3);
  EXPECT_NEAR(iter.residual, recomputed_residual(sys.matrix(), iter.x, sys.constrained_rhs()), 1e-14);
}

TEST(Iterative, RandomDiagonallyDominant) {
  std::mt19937_64 rng(11);
  const SparseMatrix a = random_diag_dominant(10, rng);
  const Vector b = Vector::LinSpaced(10, -1.0, 2.0);
  IterativeOptions opt;
  opt.tol = 1e-12;
  const SolveResult r = solve_iterative(a, b, opt);
  EXPECT_LE(r.residual, 1e-12);
  EXPECT_LE(recomputed_residual(a, r.x, b), 1e-12);
  EXPECT_NEAR(r.residual, recomputed_residual(a, r.x, b), 1e-14);
  const SolveResult d = solve_direct(a, b);
  EXPECT_LE((d.x - r.x).norm(), 10 * 1e-12 * d.x.norm() * 10);
}

TEST(Iterative, ZeroIterationsIsNonConvergence) {
  std::mt19937_64 rng(3);
  const SparseMatrix a = random_diag_dominant(5, rng);
  IterativeOptions opt;
  opt.max_iter = 0;
  try {
    solve_iterative(a, Vector::Ones(5), opt);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_FALSE(e.best().converged);
    EXPECT_EQ(e.best().iterations, 0);
    EXPECT_GT(e.best().residual, 0.0);
  }
}

TEST(Iterative, PreconditionerCutsIterations) {
  std::mt19937_64 rng(5);
  const SparseMatrix a = random_diag_dominant(40, rng);
  const LuFactorization lu(a);
  IterativeOptions opt;
  opt.tol = 1e-12;
  opt.preconditioner = [&](const Vector& r) { return lu.solve_raw(r); };
  const SolveResult r = solve_iterative(a, Vector::Ones(40), opt);
  EXPECT_LE(r.iterations, 2);
  EXPECT_LE(r.residual, 1e-12);
}

TEST(Iterative, ZeroRightHandSide) {
  SparseMatrix eye(3, 3);
  eye.setIdentity();
  IterativeOptions opt;
  const SolveResult r = solve_iterative(eye, Vector::Zero(3), opt);
  EXPECT_EQ(r.x.norm(), 0.0);
}

TEST(BlockSystemTest, ConstrainedRowsAreIdentity) {
  BlockSystem sys;
  const int f = sys.add_field("f", 3);
  DenseMatrix d(3, 3);
  d << 4, 1, 0, 1, 4, 1, 0, 1, 4;
  sys.add_block(f, f, from_dense(d));
  sys.rhs() << 1, 2, 3;
  sys.constrain(f, 0, 5.0);
  const SparseMatrix a = sys.matrix();
  const Vector b = sys.constrained_rhs();
  EXPECT_EQ(a.coeff(0, 0), 1.0);
  EXPECT_EQ(a.coeff(0, 1), 0.0);
  EXPECT_EQ(a.coeff(1, 0), 0.0);
  EXPECT_EQ(b[0], 5.0);
  EXPECT_EQ(b[1], 2.0 - 1.0 * 5.0);
  EXPECT_TRUE(is_symmetric(a));
  const SolveResult r = solve_direct(sys);
  EXPECT_NEAR(r.x[0], 5.0, 1e-15);
  // Unconstrained rows of the original system hold.
  EXPECT_NEAR((d * r.x)[1], 2.0, 1e-13);
  EXPECT_NEAR((d * r.x)[2], 3.0, 1e-13);
}

TEST(BlockSystemTest, FieldBookkeeping) {
  BlockSystem sys;
  sys.add_field("a", 2);
  sys.add_field("b", 3);
  EXPECT_EQ(sys.size(), 5);
  EXPECT_EQ(sys.field_offset(sys.field_index("b")), 2);
  EXPECT_THROW(sys.add_block(0, 1, SparseMatrix(2, 2)), DimensionMismatch);
  EXPECT_THROW(sys.constrain(0, 7), DimensionMismatch);
}

TEST(MatrixMarket, DumpRoundTrip) {
  DenseMatrix d(2, 3);
  d << 0.1, 0, 1.0 / 3.0, 0, -2, 0;
  const auto path = std::filesystem::temp_directory_path() / "slans_test.mtx";
  write_matrix_market(from_dense(d), path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "%%MatrixMarket matrix coordinate real general");
  int r, c, nnz;
  in >> r >> c >> nnz;
  EXPECT_EQ(r, 2);
  EXPECT_EQ(c, 3);
  EXPECT_EQ(nnz, 3);
  DenseMatrix back = DenseMatrix::Zero(2, 3);
  for (int k = 0; k < nnz; ++k) {
    int i, j;
    double v;
    in >> i >> j >> v;
    back(i - 1, j - 1) = v;
  }
  EXPECT_EQ(back, d);
  std::filesystem::remove(path);
}
