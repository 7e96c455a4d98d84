#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "slans/error.hpp"

namespace slans {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

/// Entries with magnitude below this are dropped when compressing.
inline constexpr double kExplicitZero = 1e-300;

/// Accumulates (row, col, value) contributions; duplicates are summed on
/// compression. One buffer per assembly worker.
class TripletBuffer {
 public:
  TripletBuffer(int rows, int cols) : rows_(rows), cols_(cols) {}

  void add(int row, int col, double value) { entries_.emplace_back(row, col, value); }
  void reserve(std::size_t n) { entries_.reserve(n); }
  void append(const TripletBuffer& other);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<Triplet>& entries() const { return entries_; }

  /// Sums duplicates and purges entries below kExplicitZero.
  SparseMatrix compress() const;

 private:
  int rows_;
  int cols_;
  std::vector<Triplet> entries_;
};

/// Removes stored entries with |a_ij| < kExplicitZero.
void purge_explicit_zeros(SparseMatrix& a);

/// Entry-wise symmetry check, relative to the largest entry magnitude.
bool is_symmetric(const SparseMatrix& a, double rel_tol = 1e-12);

/// A square system assembled from named fields. Blocks are added between
/// fields; Dirichlet rows are recorded and applied on assembly so that
/// constrained rows become identity rows and constrained columns are
/// eliminated into the right-hand side.
class BlockSystem {
 public:
  /// Registers a field of `size` unknowns; returns its index.
  int add_field(std::string name, int size);

  int field_index(const std::string& name) const;
  int field_offset(int field) const { return offsets_.at(field); }
  int field_size(int field) const { return sizes_.at(field); }
  int size() const { return total_; }

  /// Adds `scale * block` at (row field, col field). Block dimensions must
  /// match the field sizes.
  void add_block(int row_field, int col_field, const SparseMatrix& block, double scale = 1.0);
  void add_block(const std::string& row_field, const std::string& col_field,
                 const SparseMatrix& block, double scale = 1.0);

  /// Dense column/row coupling, used for scalar Lagrange multipliers.
  void add_column(int row_field, int col_field, int col, const Vector& values, double scale = 1.0);
  void add_row(int row_field, int row, int col_field, const Vector& values, double scale = 1.0);

  Vector& rhs() { return rhs_; }
  const Vector& rhs() const { return rhs_; }
  Eigen::Ref<Vector> rhs_segment(int field) { return rhs_.segment(offsets_.at(field), sizes_.at(field)); }

  /// Constrains local dof `dof` of `field` to `value`.
  void constrain(int field, int dof, double value = 0.0);
  const std::vector<int>& constrained_rows() const { return constrained_; }
  bool is_constrained(int global_row) const { return row_constrained_[global_row]; }

  /// Square matrix with constraints applied.
  SparseMatrix matrix() const;
  /// Right-hand side with constraints applied (requires matrix columns, so it
  /// is computed alongside `matrix()`).
  Vector constrained_rhs() const;

 private:
  void ensure_sized();

  std::vector<std::string> names_;
  std::vector<int> offsets_;
  std::vector<int> sizes_;
  int total_ = 0;
  std::vector<Triplet> entries_;
  Vector rhs_;
  std::vector<int> constrained_;
  std::vector<double> constrained_values_;
  std::vector<bool> row_constrained_;
};

/// ||A x - b||_2 / ||b||_2, or the absolute residual when b = 0.
double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b);

/// Sparse LU factorization (UMFPACK when available, Eigen::SparseLU
/// otherwise). Immutable after construction; `solve` is safe to call from
/// several threads.
class LuFactorization {
 public:
  explicit LuFactorization(const SparseMatrix& a);
  ~LuFactorization();
  LuFactorization(LuFactorization&&) noexcept;
  LuFactorization& operator=(LuFactorization&&) noexcept;

  int size() const { return n_; }

  /// Solves A x = b with up to two steps of iterative refinement.
  Vector solve(const Vector& b) const;
  /// Single triangular solve pair, no refinement.
  Vector solve_raw(const Vector& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int n_ = 0;
};

struct SolveResult {
  Vector x;
  double residual = 0.0;  // relative residual, recomputed from x
  int iterations = 0;
  bool converged = true;
};

/// Direct solve of the constrained system. Throws SingularMatrix or
/// DimensionMismatch.
SolveResult solve_direct(const BlockSystem& system);
SolveResult solve_direct(const SparseMatrix& a, const Vector& b);

/// Right preconditioner for GMRES: returns an approximation of A^{-1} r.
using Preconditioner = std::function<Vector(const Vector&)>;

/// Thrown when an iterative solve misses its tolerance. Carries the best
/// iterate and its diagnostics.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, SolveResult best)
      : Error("non-convergence", message), best_(std::move(best)) {}
  const SolveResult& best() const { return best_; }

 private:
  SolveResult best_;
};

struct IterativeOptions {
  double tol = 1e-10;
  int max_iter = 500;
  int restart = 60;
  Preconditioner preconditioner;  // identity when empty
};

/// Restarted, right-preconditioned GMRES. Throws ConvergenceError when the
/// relative residual is not reached within max_iter iterations.
SolveResult solve_iterative(const SparseMatrix& a, const Vector& b, const IterativeOptions& options,
                            const Vector* initial_guess = nullptr);
SolveResult solve_iterative(const BlockSystem& system, double tol, int max_iter);

/// MatrixMarket coordinate (real general) dump with round-trip precision.
void write_matrix_market(const SparseMatrix& a, const std::filesystem::path& path);

}  // namespace slans
