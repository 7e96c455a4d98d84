#include "slans/fem.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "slans/error.hpp"

namespace slans {
namespace {

std::atomic<int> g_workers{0};

// Runs job(worker, begin, end) over contiguous chunks of [0, n).
template <class Job>
void run_chunks(int n, int workers, Job&& job) {
  if (workers <= 1 || n < 2 * workers) {
    job(0, 0, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long>(n) * w / workers);
    const int end = static_cast<int>(static_cast<long>(n) * (w + 1) / workers);
    threads.emplace_back([&, w, begin, end] {
      try {
        job(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Per-worker triplet buffers concatenated in worker order produce the same
// triplet sequence as a serial sweep, so the result does not depend on the
// worker count.
template <class Local>
SparseMatrix assemble_cells(const Mesh& mesh, int rows, int cols, Local&& local) {
  const int nc = static_cast<int>(mesh.num_cells());
  const int workers = std::max(1, std::min(assembly_workers(), nc));
  std::vector<TripletBuffer> buffers(workers, TripletBuffer(rows, cols));
  run_chunks(nc, workers, [&](int w, int begin, int end) {
    for (int c = begin; c < end; ++c) local(static_cast<std::size_t>(c), buffers[w]);
  });
  TripletBuffer all(rows, cols);
  std::size_t total = 0;
  for (const auto& b : buffers) total += b.entries().size();
  all.reserve(total);
  for (const auto& b : buffers) all.append(b);
  return all.compress();
}

// Cell-local vectors computed in parallel, summed serially in cell order.
template <class Local>
Vector assemble_cell_vector(const Mesh& mesh, int size, int per_cell, Local&& local) {
  const int nc = static_cast<int>(mesh.num_cells());
  std::vector<std::pair<int, double>> contrib(static_cast<std::size_t>(nc) * per_cell, {-1, 0.0});
  const int workers = std::max(1, std::min(assembly_workers(), nc));
  run_chunks(nc, workers, [&](int, int begin, int end) {
    for (int c = begin; c < end; ++c) local(static_cast<std::size_t>(c), &contrib[static_cast<std::size_t>(c) * per_cell]);
  });
  Vector out = Vector::Zero(size);
  for (const auto& [i, v] : contrib) {
    if (i >= 0) out[i] += v;
  }
  return out;
}

int quad_degree_for(int degree, int factors) { return std::max(1, degree * factors); }

SparseMatrix block_diag2(const SparseMatrix& s) {
  const int n = static_cast<int>(s.rows());
  TripletBuffer t(2 * n, 2 * n);
  t.reserve(2 * s.nonZeros());
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < s.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(s, k); it; ++it) t.add(c * n + it.row(), c * n + it.col(), it.value());
    }
  }
  return t.compress();
}

std::array<double, 3> barycentric_of(const CellGeometry& g, const Point& p) {
  std::array<double, 3> b{};
  for (int i = 0; i < 3; ++i) {
    b[i] = 1.0 + g.grad_lambda[i][0] * (p.x - g.corners[i].x) + g.grad_lambda[i][1] * (p.y - g.corners[i].y);
  }
  return b;
}

struct VelocityAt {
  std::array<double, 2> value{};
  std::array<std::array<double, 2>, 2> grad{};  // grad[b][a] = d_a u_b
};

VelocityAt velocity_at(const MixedSpace& space, const Vector& u, const std::array<int, 6>& dofs, int nloc,
                       const BasisValues& basis) {
  VelocityAt out;
  const int ns = space.velocity_scalar().num_dofs();
  for (int i = 0; i < nloc; ++i) {
    for (int c = 0; c < 2; ++c) {
      const double coef = u[c * ns + dofs[i]];
      out.value[c] += coef * basis.value[i];
      out.grad[c][0] += coef * basis.grad[i][0];
      out.grad[c][1] += coef * basis.grad[i][1];
    }
  }
  return out;
}

void check_velocity(const MixedSpace& space, const Vector& u, const char* what) {
  if (u.size() != space.num_velocity_dofs()) {
    throw SpaceMismatch(std::string(what) + ": velocity vector has " + std::to_string(u.size()) + " entries, space has " +
                        std::to_string(space.num_velocity_dofs()));
  }
}

}  // namespace

int assembly_workers() {
  const int w = g_workers.load();
  if (w > 0) return w;
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_assembly_workers(int workers) {
  if (workers < 0) throw InvalidParameter("assembly worker count must be >= 0");
  g_workers.store(workers);
}

// ---- spaces -------------------------------------------------------------------

ScalarSpace::ScalarSpace(std::shared_ptr<const Mesh> mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
  if (!mesh_) throw InvalidParameter("ScalarSpace: null mesh");
  if (degree != 1 && degree != 2) throw InvalidParameter("ScalarSpace: degree must be 1 or 2");
  const int nv = static_cast<int>(mesh_->num_vertices());
  const int ne = static_cast<int>(mesh_->num_edges());
  num_dofs_ = degree == 1 ? nv : nv + ne;
  nodes_ = mesh_->vertices();
  on_boundary_.assign(num_dofs_, false);
  for (int v = 0; v < nv; ++v) on_boundary_[v] = mesh_->is_boundary_vertex(v);
  if (degree == 2) {
    for (const auto& e : mesh_->edges()) {
      const Point& a = mesh_->vertices()[e[0]];
      const Point& b = mesh_->vertices()[e[1]];
      nodes_.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    }
    for (int e = 0; e < ne; ++e) on_boundary_[nv + e] = mesh_->is_boundary_edge(e);
  }
  for (int d = 0; d < num_dofs_; ++d) {
    if (on_boundary_[d]) boundary_dofs_.push_back(d);
  }
}

std::array<int, 6> ScalarSpace::cell_dofs(std::size_t cell) const {
  std::array<int, 6> dofs{-1, -1, -1, -1, -1, -1};
  const auto& c = mesh_->cells()[cell];
  for (int i = 0; i < 3; ++i) dofs[i] = c[i];
  if (degree_ == 2) {
    const int nv = static_cast<int>(mesh_->num_vertices());
    const auto& e = mesh_->cell_edges()[cell];
    for (int i = 0; i < 3; ++i) dofs[3 + i] = nv + e[i];
  }
  return dofs;
}

MixedSpace::MixedSpace(ScalarSpace velocity, ScalarSpace pressure)
    : velocity_(std::move(velocity)), pressure_(std::move(pressure)) {
  if (velocity_.mesh_ptr() != pressure_.mesh_ptr()) {
    throw SpaceMismatch("velocity and pressure spaces must share one mesh");
  }
  const int ns = velocity_.num_dofs();
  dirichlet_mask_.assign(2 * ns, false);
  for (int c = 0; c < 2; ++c) {
    for (int s : velocity_.boundary_dofs()) {
      dirichlet_.push_back(c * ns + s);
      dirichlet_mask_[c * ns + s] = true;
    }
  }
}

std::shared_ptr<const MixedSpace> MixedSpace::taylor_hood(std::shared_ptr<const Mesh> mesh) {
  return std::make_shared<const MixedSpace>(ScalarSpace(mesh, 2), ScalarSpace(mesh, 1));
}

std::shared_ptr<const MixedSpace> MixedSpace::equal_order_p1(std::shared_ptr<const Mesh> mesh) {
  return std::make_shared<const MixedSpace>(ScalarSpace(mesh, 1), ScalarSpace(mesh, 1));
}

void Field::check(const MixedSpace& space) const {
  const int expected = role == FieldRole::kVelocity ? space.num_velocity_dofs() : space.num_pressure_dofs();
  if (coeffs.size() != expected) {
    throw SpaceMismatch(std::string(role == FieldRole::kVelocity ? "velocity" : "pressure") + " field has " +
                        std::to_string(coeffs.size()) + " coefficients, space expects " + std::to_string(expected));
  }
}

// ---- geometry and basis ---------------------------------------------------------

CellGeometry CellGeometry::of(const Mesh& mesh, std::size_t cell) {
  CellGeometry g;
  const auto& c = mesh.cells()[cell];
  for (int i = 0; i < 3; ++i) g.corners[i] = mesh.vertices()[c[i]];
  const Point &p0 = g.corners[0], &p1 = g.corners[1], &p2 = g.corners[2];
  g.area = mesh.signed_area(cell);
  const double inv = 1.0 / (2.0 * g.area);
  g.grad_lambda[0] = {(p1.y - p2.y) * inv, (p2.x - p1.x) * inv};
  g.grad_lambda[1] = {(p2.y - p0.y) * inv, (p0.x - p2.x) * inv};
  g.grad_lambda[2] = {(p0.y - p1.y) * inv, (p1.x - p0.x) * inv};
  return g;
}

Point CellGeometry::map(const std::array<double, 3>& bary) const {
  Point p;
  for (int i = 0; i < 3; ++i) {
    p.x += bary[i] * corners[i].x;
    p.y += bary[i] * corners[i].y;
  }
  return p;
}

BasisValues evaluate_basis(int degree, const std::array<double, 3>& l, const CellGeometry& g) {
  BasisValues b;
  const auto& gl = g.grad_lambda;
  if (degree == 1) {
    for (int i = 0; i < 3; ++i) {
      b.value[i] = l[i];
      b.grad[i] = gl[i];
    }
    return b;
  }
  for (int i = 0; i < 3; ++i) {
    b.value[i] = l[i] * (2.0 * l[i] - 1.0);
    const double s = 4.0 * l[i] - 1.0;
    b.grad[i] = {s * gl[i][0], s * gl[i][1]};
  }
  for (int e = 0; e < 3; ++e) {
    const int a = e, c = (e + 1) % 3;
    b.value[3 + e] = 4.0 * l[a] * l[c];
    b.grad[3 + e] = {4.0 * (l[a] * gl[c][0] + l[c] * gl[a][0]), 4.0 * (l[a] * gl[c][1] + l[c] * gl[a][1])};
  }
  return b;
}

// ---- assembly --------------------------------------------------------------------

SparseMatrix assemble_scalar_mass(const ScalarSpace& space) {
  const int n = space.num_dofs(), nloc = space.dofs_per_cell();
  const QuadratureRule rule = dunavant_rule(quad_degree_for(space.degree(), 2));
  return assemble_cells(space.mesh(), n, n, [&](std::size_t c, TripletBuffer& out) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = space.cell_dofs(c);
    double local[6][6] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues b = evaluate_basis(space.degree(), rule.points[q], g);
      const double w = rule.weights[q] * 2.0 * g.area;
      for (int i = 0; i < nloc; ++i) {
        for (int j = 0; j < nloc; ++j) local[i][j] += w * b.value[i] * b.value[j];
      }
    }
    for (int i = 0; i < nloc; ++i) {
      for (int j = 0; j < nloc; ++j) out.add(dofs[i], dofs[j], local[i][j]);
    }
  });
}

SparseMatrix assemble_scalar_stiffness(const ScalarSpace& space) {
  const int n = space.num_dofs(), nloc = space.dofs_per_cell();
  const QuadratureRule rule = dunavant_rule(quad_degree_for(space.degree() - 1, 2));
  return assemble_cells(space.mesh(), n, n, [&](std::size_t c, TripletBuffer& out) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = space.cell_dofs(c);
    double local[6][6] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues b = evaluate_basis(space.degree(), rule.points[q], g);
      const double w = rule.weights[q] * 2.0 * g.area;
      for (int i = 0; i < nloc; ++i) {
        for (int j = 0; j < nloc; ++j) {
          local[i][j] += w * (b.grad[i][0] * b.grad[j][0] + b.grad[i][1] * b.grad[j][1]);
        }
      }
    }
    for (int i = 0; i < nloc; ++i) {
      for (int j = 0; j < nloc; ++j) out.add(dofs[i], dofs[j], local[i][j]);
    }
  });
}

SparseMatrix assemble_mass(const MixedSpace& space) { return block_diag2(assemble_scalar_mass(space.velocity_scalar())); }

SparseMatrix assemble_stiffness(const MixedSpace& space) {
  return block_diag2(assemble_scalar_stiffness(space.velocity_scalar()));
}

SparseMatrix assemble_pressure_mass(const MixedSpace& space) { return assemble_scalar_mass(space.pressure()); }

Vector pressure_mean_weights(const MixedSpace& space) {
  return load_scalar(space.pressure(), [](double, double) { return 1.0; }, 2);
}

SparseMatrix assemble_divergence(const MixedSpace& space) {
  const ScalarSpace& vs = space.velocity_scalar();
  const ScalarSpace& ps = space.pressure();
  const int ns = vs.num_dofs(), np = ps.num_dofs();
  const int nv = vs.dofs_per_cell(), npl = ps.dofs_per_cell();
  const QuadratureRule rule = dunavant_rule(std::max(1, ps.degree() + vs.degree() - 1));
  return assemble_cells(space.mesh(), np, 2 * ns, [&](std::size_t c, TripletBuffer& out) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto vd = vs.cell_dofs(c);
    const auto pd = ps.cell_dofs(c);
    double local[6][2][6] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues bv = evaluate_basis(vs.degree(), rule.points[q], g);
      const BasisValues bp = evaluate_basis(ps.degree(), rule.points[q], g);
      const double w = rule.weights[q] * 2.0 * g.area;
      for (int i = 0; i < npl; ++i) {
        for (int comp = 0; comp < 2; ++comp) {
          for (int j = 0; j < nv; ++j) local[i][comp][j] += w * bp.value[i] * bv.grad[j][comp];
        }
      }
    }
    for (int i = 0; i < npl; ++i) {
      for (int comp = 0; comp < 2; ++comp) {
        for (int j = 0; j < nv; ++j) out.add(pd[i], comp * ns + vd[j], local[i][comp][j]);
      }
    }
  });
}

SparseMatrix assemble_convection(const MixedSpace& space, const Vector& v_known, ConvectionForm form) {
  check_velocity(space, v_known, "assemble_convection");
  const ScalarSpace& vs = space.velocity_scalar();
  const int ns = vs.num_dofs(), nloc = vs.dofs_per_cell();
  const QuadratureRule rule = dunavant_rule(std::max(2, 3 * vs.degree() - 1));
  const double skew = form == ConvectionForm::kSkew ? 0.5 : 0.0;
  return assemble_cells(space.mesh(), 2 * ns, 2 * ns, [&](std::size_t c, TripletBuffer& out) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = vs.cell_dofs(c);
    // local[b][i][a][j]: row (b, i), column (a, j)
    double local[2][6][2][6] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues bs = evaluate_basis(vs.degree(), rule.points[q], g);
      const VelocityAt w = velocity_at(space, v_known, dofs, nloc, bs);
      const double wt = rule.weights[q] * 2.0 * g.area;
      for (int b = 0; b < 2; ++b) {
        for (int i = 0; i < nloc; ++i) {
          const double ni = bs.value[i];
          for (int a = 0; a < 2; ++a) {
            for (int j = 0; j < nloc; ++j) {
              const double nj = bs.value[j];
              double v = nj * w.grad[b][a] * ni + ni * bs.grad[j][b] * w.value[a];
              v += skew * (bs.grad[j][a] * w.value[b] * ni + bs.grad[i][b] * nj * w.value[a]);
              local[b][i][a][j] += wt * v;
            }
          }
        }
      }
    }
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < nloc; ++i) {
        for (int a = 0; a < 2; ++a) {
          for (int j = 0; j < nloc; ++j) out.add(b * ns + dofs[i], a * ns + dofs[j], local[b][i][a][j]);
        }
      }
    }
  });
}

SparseMatrix assemble_transport_skew(const MixedSpace& space, const Vector& advecting) {
  check_velocity(space, advecting, "assemble_transport_skew");
  const ScalarSpace& vs = space.velocity_scalar();
  const int ns = vs.num_dofs(), nloc = vs.dofs_per_cell();
  const QuadratureRule rule = dunavant_rule(std::max(2, 3 * vs.degree() - 1));
  return assemble_cells(space.mesh(), 2 * ns, 2 * ns, [&](std::size_t c, TripletBuffer& out) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = vs.cell_dofs(c);
    double local[6][6] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues bs = evaluate_basis(vs.degree(), rule.points[q], g);
      const VelocityAt w = velocity_at(space, advecting, dofs, nloc, bs);
      const double wt = rule.weights[q] * 2.0 * g.area;
      for (int i = 0; i < nloc; ++i) {
        const double wgi = w.value[0] * bs.grad[i][0] + w.value[1] * bs.grad[i][1];
        for (int j = 0; j < nloc; ++j) {
          const double wgj = w.value[0] * bs.grad[j][0] + w.value[1] * bs.grad[j][1];
          local[i][j] += wt * 0.5 * (wgj * bs.value[i] - wgi * bs.value[j]);
        }
      }
    }
    for (int comp = 0; comp < 2; ++comp) {
      for (int i = 0; i < nloc; ++i) {
        for (int j = 0; j < nloc; ++j) out.add(comp * ns + dofs[i], comp * ns + dofs[j], local[i][j]);
      }
    }
  });
}

double trilinear(const MixedSpace& space, const Vector& z1, const Vector& z2, const Vector& w, ConvectionForm form) {
  check_velocity(space, z1, "trilinear");
  check_velocity(space, z2, "trilinear");
  check_velocity(space, w, "trilinear");
  const ScalarSpace& vs = space.velocity_scalar();
  const int nloc = vs.dofs_per_cell();
  const QuadratureRule rule = dunavant_rule(std::max(2, 3 * vs.degree() - 1));
  const double skew = form == ConvectionForm::kSkew ? 0.5 : 0.0;
  std::vector<double> per_cell(space.mesh().num_cells(), 0.0);
  const int nc = static_cast<int>(space.mesh().num_cells());
  run_chunks(nc, std::max(1, std::min(assembly_workers(), nc)), [&](int, int begin, int end) {
    for (int c = begin; c < end; ++c) {
      const CellGeometry g = CellGeometry::of(space.mesh(), c);
      const auto dofs = vs.cell_dofs(c);
      double sum = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const BasisValues bs = evaluate_basis(vs.degree(), rule.points[q], g);
        const VelocityAt a = velocity_at(space, z1, dofs, nloc, bs);
        const VelocityAt b = velocity_at(space, z2, dofs, nloc, bs);
        const VelocityAt t = velocity_at(space, w, dofs, nloc, bs);
        double v = 0.0;
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            v += a.value[j] * b.grad[i][j] * t.value[i];  // (z1 . grad) z2 . w
            v += t.value[j] * a.grad[i][j] * b.value[i];  // (w . grad) z1 . z2
          }
        }
        const double div_a = a.grad[0][0] + a.grad[1][1];
        const double div_t = t.grad[0][0] + t.grad[1][1];
        const double bt = b.value[0] * t.value[0] + b.value[1] * t.value[1];
        const double ab = a.value[0] * b.value[0] + a.value[1] * b.value[1];
        v += skew * (div_a * bt + div_t * ab);
        sum += rule.weights[q] * 2.0 * g.area * v;
      }
      per_cell[c] = sum;
    }
  });
  double total = 0.0;
  for (double v : per_cell) total += v;
  return total;
}

// ---- constraints -------------------------------------------------------------------

void apply_dirichlet(BlockSystem& system, int field, const MixedSpace& space) {
  if (system.field_size(field) != space.num_velocity_dofs()) {
    throw DimensionMismatch("apply_dirichlet: field size does not match the velocity space");
  }
  for (int d : space.dirichlet_dofs()) system.constrain(field, d, 0.0);
}

void apply_dirichlet(BlockSystem& system, int field, const ScalarSpace& space) {
  if (system.field_size(field) != space.num_dofs()) {
    throw DimensionMismatch("apply_dirichlet: field size does not match the scalar space");
  }
  for (int d : space.boundary_dofs()) system.constrain(field, d, 0.0);
}

void pin_pressure(BlockSystem& system, int field, const MixedSpace& space) {
  if (system.field_size(field) != space.num_pressure_dofs()) {
    throw DimensionMismatch("pin_pressure: field size does not match the pressure space");
  }
  system.constrain(field, 0, 0.0);
}

void remove_pressure_mean(Vector& p, const Vector& mean_weights) {
  if (p.size() != mean_weights.size()) throw DimensionMismatch("remove_pressure_mean: length mismatch");
  p.array() -= p.dot(mean_weights) / mean_weights.sum();
}

SparseMatrix constrain_velocity_operator(const SparseMatrix& a, const MixedSpace& space) {
  const int n = space.num_velocity_dofs();
  if (a.rows() != n || a.cols() != n) throw DimensionMismatch("constrain_velocity_operator: shape mismatch");
  TripletBuffer t(n, n);
  t.reserve(a.nonZeros());
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      if (!space.is_dirichlet(it.row()) && !space.is_dirichlet(it.col())) t.add(it.row(), it.col(), it.value());
    }
  }
  for (int d : space.dirichlet_dofs()) t.add(d, d, 1.0);
  return t.compress();
}

void zero_dirichlet(Vector& v, const MixedSpace& space) {
  check_velocity(space, v, "zero_dirichlet");
  for (int d : space.dirichlet_dofs()) v[d] = 0.0;
}

// ---- interpolation, loads, errors ------------------------------------------------

Vector interpolate(const ScalarSpace& space, const ScalarFunction& f) {
  Vector out(space.num_dofs());
  for (int i = 0; i < space.num_dofs(); ++i) out[i] = f(space.nodes()[i].x, space.nodes()[i].y);
  return out;
}

Vector interpolate_velocity(const MixedSpace& space, const VectorFunction& f) {
  const ScalarSpace& vs = space.velocity_scalar();
  const int ns = vs.num_dofs();
  Vector out(2 * ns);
  for (int i = 0; i < ns; ++i) {
    const auto v = f(vs.nodes()[i].x, vs.nodes()[i].y);
    out[i] = v[0];
    out[ns + i] = v[1];
  }
  return out;
}

Vector load_scalar(const ScalarSpace& space, const ScalarFunction& f, int gauss_order) {
  const QuadratureRule rule = collapsed_gauss_rule(gauss_order);
  const int nloc = space.dofs_per_cell();
  return assemble_cell_vector(space.mesh(), space.num_dofs(), 6, [&](std::size_t c, std::pair<int, double>* out) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = space.cell_dofs(c);
    double local[6] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues b = evaluate_basis(space.degree(), rule.points[q], g);
      const Point x = g.map(rule.points[q]);
      const double fw = f(x.x, x.y) * rule.weights[q] * 2.0 * g.area;
      for (int i = 0; i < nloc; ++i) local[i] += fw * b.value[i];
    }
    for (int i = 0; i < nloc; ++i) out[i] = {dofs[i], local[i]};
  });
}

Vector load_velocity(const MixedSpace& space, const VectorFunction& f, int gauss_order) {
  const QuadratureRule rule = collapsed_gauss_rule(gauss_order);
  const ScalarSpace& vs = space.velocity_scalar();
  const int nloc = vs.dofs_per_cell(), ns = vs.num_dofs();
  return assemble_cell_vector(space.mesh(), 2 * ns, 12, [&](std::size_t c, std::pair<int, double>* out) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = vs.cell_dofs(c);
    double local[2][6] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues b = evaluate_basis(vs.degree(), rule.points[q], g);
      const Point x = g.map(rule.points[q]);
      const auto fv = f(x.x, x.y);
      const double w = rule.weights[q] * 2.0 * g.area;
      for (int i = 0; i < nloc; ++i) {
        local[0][i] += w * fv[0] * b.value[i];
        local[1][i] += w * fv[1] * b.value[i];
      }
    }
    for (int comp = 0; comp < 2; ++comp) {
      for (int i = 0; i < nloc; ++i) out[comp * 6 + i] = {comp * ns + dofs[i], local[comp][i]};
    }
  });
}

Vector load_velocity_gradient(const MixedSpace& space, const GradientFunction& grad_f, int gauss_order) {
  const QuadratureRule rule = collapsed_gauss_rule(gauss_order);
  const ScalarSpace& vs = space.velocity_scalar();
  const int nloc = vs.dofs_per_cell(), ns = vs.num_dofs();
  return assemble_cell_vector(space.mesh(), 2 * ns, 12, [&](std::size_t c, std::pair<int, double>* out) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = vs.cell_dofs(c);
    double local[2][6] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues b = evaluate_basis(vs.degree(), rule.points[q], g);
      const Point x = g.map(rule.points[q]);
      const auto gf = grad_f(x.x, x.y);
      const double w = rule.weights[q] * 2.0 * g.area;
      for (int comp = 0; comp < 2; ++comp) {
        for (int i = 0; i < nloc; ++i) {
          local[comp][i] += w * (gf[2 * comp] * b.grad[i][0] + gf[2 * comp + 1] * b.grad[i][1]);
        }
      }
    }
    for (int comp = 0; comp < 2; ++comp) {
      for (int i = 0; i < nloc; ++i) out[comp * 6 + i] = {comp * ns + dofs[i], local[comp][i]};
    }
  });
}

double l2_error(const ScalarSpace& space, const Vector& u, const ScalarFunction& exact, int gauss_order) {
  if (u.size() != space.num_dofs()) throw SpaceMismatch("l2_error: coefficient count does not match the space");
  const QuadratureRule rule = collapsed_gauss_rule(gauss_order);
  const int nloc = space.dofs_per_cell();
  double sum = 0.0;
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = space.cell_dofs(c);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues b = evaluate_basis(space.degree(), rule.points[q], g);
      const Point x = g.map(rule.points[q]);
      double uh = 0.0;
      for (int i = 0; i < nloc; ++i) uh += u[dofs[i]] * b.value[i];
      const double e = uh - exact(x.x, x.y);
      sum += rule.weights[q] * 2.0 * g.area * e * e;
    }
  }
  return std::sqrt(sum);
}

double l2_error_velocity(const MixedSpace& space, const Vector& u, const VectorFunction& exact, int gauss_order) {
  check_velocity(space, u, "l2_error_velocity");
  const QuadratureRule rule = collapsed_gauss_rule(gauss_order);
  const ScalarSpace& vs = space.velocity_scalar();
  const int nloc = vs.dofs_per_cell();
  double sum = 0.0;
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const CellGeometry g = CellGeometry::of(space.mesh(), c);
    const auto dofs = vs.cell_dofs(c);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues b = evaluate_basis(vs.degree(), rule.points[q], g);
      const VelocityAt uh = velocity_at(space, u, dofs, nloc, b);
      const Point x = g.map(rule.points[q]);
      const auto ex = exact(x.x, x.y);
      const double e0 = uh.value[0] - ex[0], e1 = uh.value[1] - ex[1];
      sum += rule.weights[q] * 2.0 * g.area * (e0 * e0 + e1 * e1);
    }
  }
  return std::sqrt(sum);
}

std::array<double, 2> evaluate_velocity(const MixedSpace& space, const Vector& u, std::size_t cell,
                                        const std::array<double, 3>& bary) {
  check_velocity(space, u, "evaluate_velocity");
  if (cell >= space.mesh().num_cells()) throw InvalidParameter("evaluate_velocity: cell index out of range");
  const CellGeometry g = CellGeometry::of(space.mesh(), cell);
  const BasisValues b = evaluate_basis(space.velocity_scalar().degree(), bary, g);
  return velocity_at(space, u, space.velocity_scalar().cell_dofs(cell), space.velocity_scalar().dofs_per_cell(), b)
      .value;
}

Vector prolongate_velocity(const MixedSpace& coarse, const MixedSpace& fine, const Vector& u) {
  check_velocity(coarse, u, "prolongate_velocity");
  const Mesh& fm = fine.mesh();
  const auto& parents = fm.parent_cells();
  if (parents.size() != fm.num_cells() || fm.num_cells() != 4 * coarse.mesh().num_cells()) {
    throw SpaceMismatch("prolongate_velocity: fine mesh is not a uniform refinement of the coarse mesh");
  }
  if (coarse.velocity_scalar().degree() != fine.velocity_scalar().degree()) {
    throw SpaceMismatch("prolongate_velocity: velocity degrees differ");
  }
  const ScalarSpace& fs = fine.velocity_scalar();
  const int nsf = fs.num_dofs();
  Vector out = Vector::Zero(2 * nsf);
  std::vector<char> done(nsf, 0);
  for (std::size_t c = 0; c < fm.num_cells(); ++c) {
    const int parent = parents[c];
    const CellGeometry pg = CellGeometry::of(coarse.mesh(), parent);
    const auto dofs = fs.cell_dofs(c);
    for (int i = 0; i < fs.dofs_per_cell(); ++i) {
      const int d = dofs[i];
      if (done[d]) continue;
      const auto v = evaluate_velocity(coarse, u, parent, barycentric_of(pg, fs.nodes()[d]));
      out[d] = v[0];
      out[nsf + d] = v[1];
      done[d] = 1;
    }
  }
  return out;
}

}  // namespace slans
