#include "slans/linalg.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#ifdef SLANS_HAVE_UMFPACK
#include <umfpack.h>
#endif

namespace slans {

void TripletBuffer::append(const TripletBuffer& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) throw DimensionMismatch("TripletBuffer::append: shape differs");
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

SparseMatrix TripletBuffer::compress() const {
  SparseMatrix a(rows_, cols_);
  a.setFromTriplets(entries_.begin(), entries_.end());
  purge_explicit_zeros(a);
  return a;
}

void purge_explicit_zeros(SparseMatrix& a) {
  a.prune([](int, int, double v) { return std::abs(v) >= kExplicitZero; });
  a.makeCompressed();
}

bool is_symmetric(const SparseMatrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  double scale = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  }
  if (scale == 0.0) return true;
  const SparseMatrix diff = a - SparseMatrix(a.transpose());
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      if (std::abs(it.value()) > rel_tol * scale) return false;
    }
  }
  return true;
}

// ---- BlockSystem --------------------------------------------------------------

int BlockSystem::add_field(std::string name, int size) {
  if (size < 0) throw InvalidParameter("field size must be non-negative");
  for (const auto& n : names_) {
    if (n == name) throw InvalidParameter("duplicate field name '" + name + "'");
  }
  names_.push_back(std::move(name));
  offsets_.push_back(total_);
  sizes_.push_back(size);
  total_ += size;
  ensure_sized();
  return static_cast<int>(names_.size()) - 1;
}

int BlockSystem::field_index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  throw InvalidParameter("unknown field '" + name + "'");
}

void BlockSystem::ensure_sized() {
  const int old = static_cast<int>(rhs_.size());
  rhs_.conservativeResize(total_);
  for (int i = old; i < total_; ++i) rhs_[i] = 0.0;
  row_constrained_.resize(total_, false);
}

void BlockSystem::add_block(int row_field, int col_field, const SparseMatrix& block, double scale) {
  if (block.rows() != sizes_.at(row_field) || block.cols() != sizes_.at(col_field)) {
    std::ostringstream msg;
    msg << "block (" << names_[row_field] << ", " << names_[col_field] << ") is " << block.rows() << "x"
        << block.cols() << ", expected " << sizes_[row_field] << "x" << sizes_[col_field];
    throw DimensionMismatch(msg.str());
  }
  const int r0 = offsets_[row_field], c0 = offsets_[col_field];
  for (int k = 0; k < block.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(block, k); it; ++it) {
      entries_.emplace_back(r0 + it.row(), c0 + it.col(), scale * it.value());
    }
  }
}

void BlockSystem::add_block(const std::string& row_field, const std::string& col_field, const SparseMatrix& block,
                            double scale) {
  add_block(field_index(row_field), field_index(col_field), block, scale);
}

void BlockSystem::add_column(int row_field, int col_field, int col, const Vector& values, double scale) {
  if (values.size() != sizes_.at(row_field)) throw DimensionMismatch("add_column: length mismatch");
  const int r0 = offsets_[row_field], c = offsets_.at(col_field) + col;
  for (int i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) entries_.emplace_back(r0 + i, c, scale * values[i]);
  }
}

void BlockSystem::add_row(int row_field, int row, int col_field, const Vector& values, double scale) {
  if (values.size() != sizes_.at(col_field)) throw DimensionMismatch("add_row: length mismatch");
  const int r = offsets_.at(row_field) + row, c0 = offsets_[col_field];
  for (int i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) entries_.emplace_back(r, c0 + i, scale * values[i]);
  }
}

void BlockSystem::constrain(int field, int dof, double value) {
  if (dof < 0 || dof >= sizes_.at(field)) throw DimensionMismatch("constrain: dof out of range");
  const int row = offsets_[field] + dof;
  if (row_constrained_[row]) return;
  row_constrained_[row] = true;
  constrained_.push_back(row);
  constrained_values_.push_back(value);
}

SparseMatrix BlockSystem::matrix() const {
  std::vector<Triplet> kept;
  kept.reserve(entries_.size() + constrained_.size());
  for (const auto& t : entries_) {
    if (!row_constrained_[t.row()] && !row_constrained_[t.col()]) kept.push_back(t);
  }
  for (int row : constrained_) kept.emplace_back(row, row, 1.0);
  SparseMatrix a(total_, total_);
  a.setFromTriplets(kept.begin(), kept.end());
  purge_explicit_zeros(a);
  return a;
}

Vector BlockSystem::constrained_rhs() const {
  Vector b = rhs_;
  std::vector<double> value(total_, 0.0);
  for (std::size_t i = 0; i < constrained_.size(); ++i) value[constrained_[i]] = constrained_values_[i];
  for (const auto& t : entries_) {
    if (!row_constrained_[t.row()] && row_constrained_[t.col()]) b[t.row()] -= t.value() * value[t.col()];
  }
  for (std::size_t i = 0; i < constrained_.size(); ++i) b[constrained_[i]] = constrained_values_[i];
  return b;
}

// ---- residuals -------------------------------------------------------------------

double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double r = (a * x - b).norm();
  const double nb = b.norm();
  return nb > 0.0 ? r / nb : r;
}

// ---- LU ---------------------------------------------------------------------------

#ifdef SLANS_HAVE_UMFPACK
struct LuFactorization::Impl {
  SparseMatrix a;
  void* numeric = nullptr;
  double control[UMFPACK_CONTROL];

  explicit Impl(const SparseMatrix& m) : a(m) {
    a.makeCompressed();
    umfpack_di_defaults(control);
    control[UMFPACK_IRSTEP] = 0;
    double info[UMFPACK_INFO];
    void* symbolic = nullptr;
    const int n = static_cast<int>(a.rows());
    int status = umfpack_di_symbolic(n, n, a.outerIndexPtr(), a.innerIndexPtr(), a.valuePtr(), &symbolic, control, info);
    if (status != UMFPACK_OK) {
      umfpack_di_free_symbolic(&symbolic);
      throw SingularMatrix("UMFPACK symbolic analysis failed (status " + std::to_string(status) + ")", -1);
    }
    status = umfpack_di_numeric(a.outerIndexPtr(), a.innerIndexPtr(), a.valuePtr(), symbolic, &numeric, control, info);
    umfpack_di_free_symbolic(&symbolic);
    if (status == UMFPACK_WARNING_singular_matrix) {
      const long pivot = zero_pivot_column(n);
      umfpack_di_free_numeric(&numeric);
      throw SingularMatrix("matrix is singular: zero pivot in column " + std::to_string(pivot), pivot);
    }
    if (status != UMFPACK_OK) {
      umfpack_di_free_numeric(&numeric);
      throw SingularMatrix("UMFPACK numeric factorization failed (status " + std::to_string(status) + ")", -1);
    }
  }

  long zero_pivot_column(int n) const {
    std::vector<int> p(n), q(n);
    std::vector<double> d(n);
    int do_recip = 0;
    if (umfpack_di_get_numeric(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, p.data(), q.data(), d.data(),
                               &do_recip, nullptr, numeric) != UMFPACK_OK) {
      return -1;
    }
    for (int k = 0; k < n; ++k) {
      if (d[k] == 0.0 || !std::isfinite(d[k])) return q[k];
    }
    return -1;
  }

  ~Impl() {
    if (numeric) umfpack_di_free_numeric(&numeric);
  }

  Vector solve(const Vector& b) const {
    Vector x(b.size());
    double info[UMFPACK_INFO];
    const int status = umfpack_di_solve(UMFPACK_A, a.outerIndexPtr(), a.innerIndexPtr(), a.valuePtr(), x.data(),
                                        b.data(), numeric, control, info);
    if (status != UMFPACK_OK) throw SingularMatrix("UMFPACK solve failed (status " + std::to_string(status) + ")", -1);
    return x;
  }
};
#else
struct LuFactorization::Impl {
  SparseMatrix a;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  mutable std::mutex mutex;

  explicit Impl(const SparseMatrix& m) : a(m) {
    a.makeCompressed();
    lu.compute(a);
    if (lu.info() != Eigen::Success) {
      const std::string msg = lu.lastErrorMessage();
      long pivot = -1;
      const auto pos = msg.find("ZERO COLUMN AT ");
      if (pos != std::string::npos) pivot = std::stol(msg.substr(pos + 15)) - 1;
      throw SingularMatrix("matrix is singular: " + msg, pivot);
    }
  }

  Vector solve(const Vector& b) const {
    std::lock_guard<std::mutex> lock(mutex);
    return lu.solve(b);
  }
};
#endif

namespace {

// Structurally empty rows or columns are reported before factorization.
void check_structure(const SparseMatrix& a) {
  std::vector<char> row_seen(a.rows(), 0);
  for (int k = 0; k < a.outerSize(); ++k) {
    bool any = false;
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      if (it.value() != 0.0) {
        any = true;
        row_seen[it.row()] = 1;
      }
    }
    if (!any) throw SingularMatrix("matrix is singular: column " + std::to_string(k) + " is empty", k);
  }
  for (int i = 0; i < a.rows(); ++i) {
    if (!row_seen[i]) throw SingularMatrix("matrix is singular: row " + std::to_string(i) + " is empty", i);
  }
}

}  // namespace

LuFactorization::LuFactorization(const SparseMatrix& a) : n_(static_cast<int>(a.rows())) {
  if (a.rows() != a.cols()) throw DimensionMismatch("LU requires a square matrix");
  check_structure(a);
  impl_ = std::make_unique<Impl>(a);
}

LuFactorization::~LuFactorization() = default;
LuFactorization::LuFactorization(LuFactorization&&) noexcept = default;
LuFactorization& LuFactorization::operator=(LuFactorization&&) noexcept = default;

Vector LuFactorization::solve_raw(const Vector& b) const {
  if (b.size() != n_) throw DimensionMismatch("LU solve: rhs length mismatch");
  return impl_->solve(b);
}

Vector LuFactorization::solve(const Vector& b) const {
  Vector x = solve_raw(b);
  if (!x.allFinite()) throw SingularMatrix("LU solve produced non-finite values", -1);
  const double nb = b.norm();
  for (int it = 0; it < 2 && nb > 0.0; ++it) {
    const Vector r = b - impl_->a * x;
    if (r.norm() <= 1e-15 * nb) break;
    x += impl_->solve(r);
  }
  return x;
}

SolveResult solve_direct(const SparseMatrix& a, const Vector& b) {
  if (a.rows() != a.cols()) throw DimensionMismatch("solve_direct: matrix is not square");
  if (b.size() != a.rows()) throw DimensionMismatch("solve_direct: rhs length mismatch");
  LuFactorization lu(a);
  SolveResult result;
  result.x = lu.solve(b);
  result.residual = relative_residual(a, result.x, b);
  result.iterations = 1;
  return result;
}

SolveResult solve_direct(const BlockSystem& system) { return solve_direct(system.matrix(), system.constrained_rhs()); }

// ---- GMRES --------------------------------------------------------------------------

SolveResult solve_iterative(const SparseMatrix& a, const Vector& b, const IterativeOptions& options,
                            const Vector* initial_guess) {
  const int n = static_cast<int>(a.rows());
  if (a.rows() != a.cols()) throw DimensionMismatch("solve_iterative: matrix is not square");
  if (b.size() != n) throw DimensionMismatch("solve_iterative: rhs length mismatch");
  const auto precondition = [&](const Vector& v) -> Vector {
    return options.preconditioner ? options.preconditioner(v) : v;
  };

  SolveResult result;
  result.x = initial_guess ? *initial_guess : Vector::Zero(n);
  const double nb = b.norm();
  const double scale = nb > 0.0 ? nb : 1.0;
  Vector r = b - a * result.x;
  result.residual = r.norm() / scale;
  result.converged = result.residual <= options.tol;
  const int restart = std::max(1, std::min(options.restart, n));

  while (!result.converged && result.iterations < options.max_iter) {
    const double beta = r.norm();
    DenseMatrix basis(n, restart + 1);
    DenseMatrix hess = DenseMatrix::Zero(restart + 1, restart);
    Vector cs = Vector::Zero(restart), sn = Vector::Zero(restart);
    Vector g = Vector::Zero(restart + 1);
    basis.col(0) = r / beta;
    g[0] = beta;
    int j = 0;
    for (; j < restart && result.iterations < options.max_iter; ++j) {
      ++result.iterations;
      Vector w = a * precondition(basis.col(j));
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis.col(i).dot(w);
        w -= hess(i, j) * basis.col(i);
      }
      hess(j + 1, j) = w.norm();
      if (hess(j + 1, j) > 0.0) basis.col(j + 1) = w / hess(j + 1, j);
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * hess(i, j) + sn[i] * hess(i + 1, j);
        hess(i + 1, j) = -sn[i] * hess(i, j) + cs[i] * hess(i + 1, j);
        hess(i, j) = t;
      }
      const double denom = std::hypot(hess(j, j), hess(j + 1, j));
      cs[j] = denom > 0.0 ? hess(j, j) / denom : 1.0;
      sn[j] = denom > 0.0 ? hess(j + 1, j) / denom : 0.0;
      hess(j, j) = denom;
      hess(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      if (std::abs(g[j + 1]) / scale <= 0.1 * options.tol || hess(j, j) == 0.0) {
        ++j;
        break;
      }
    }
    if (j == 0) break;
    const Vector y = hess.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    result.x += precondition(basis.leftCols(j) * y);
    r = b - a * result.x;
    result.residual = r.norm() / scale;
    result.converged = result.residual <= options.tol;
  }

  if (!result.converged) {
    std::ostringstream msg;
    msg << "GMRES did not reach tol " << options.tol << " in " << result.iterations << " iterations (residual "
        << result.residual << ")";
    throw ConvergenceError(msg.str(), std::move(result));
  }
  return result;
}

SolveResult solve_iterative(const BlockSystem& system, double tol, int max_iter) {
  IterativeOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return solve_iterative(system.matrix(), system.constrained_rhs(), options);
}

void write_matrix_market(const SparseMatrix& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  out << std::setprecision(17);
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace slans
