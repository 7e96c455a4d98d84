#include "slans/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <unordered_map>

#include "slans/error.hpp"

namespace slans {
namespace {

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double signed_area_of(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

Mesh::Mesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> cells)
    : vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (cells_.empty()) throw InvalidParameter("mesh has no cells");
  const int nv = static_cast<int>(vertices_.size());
  for (auto& c : cells_) {
    for (int v : c) {
      if (v < 0 || v >= nv) throw InvalidParameter("cell references a missing vertex");
    }
    double area = signed_area_of(vertices_[c[0]], vertices_[c[1]], vertices_[c[2]]);
    if (area < 0.0) {
      std::swap(c[1], c[2]);
      area = -area;
    }
    if (!(area > 0.0)) throw InvalidParameter("degenerate cell with zero area");
  }

  std::unordered_map<std::uint64_t, int> index;
  index.reserve(cells_.size() * 2);
  cell_edges_.resize(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    for (int e = 0; e < 3; ++e) {
      const int a = cells_[c][e];
      const int b = cells_[c][(e + 1) % 3];
      const auto [it, inserted] = index.try_emplace(edge_key(a, b), static_cast<int>(edges_.size()));
      if (inserted) {
        edges_.push_back({std::min(a, b), std::max(a, b)});
        edge_cells_.push_back({static_cast<int>(c), -1});
      } else {
        auto& adj = edge_cells_[it->second];
        if (adj[1] >= 0) throw InvalidParameter("non-manifold edge shared by more than two cells");
        adj[1] = static_cast<int>(c);
      }
      cell_edges_[c][e] = it->second;
    }
  }

  boundary_vertex_.assign(vertices_.size(), false);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edge_cells_[e][1] >= 0) continue;
    // Keep the orientation of the owning cell so boundary edges run
    // counter-clockwise.
    const auto& cell = cells_[edge_cells_[e][0]];
    std::array<int, 2> v = edges_[e];
    for (int l = 0; l < 3; ++l) {
      if (edge_key(cell[l], cell[(l + 1) % 3]) == edge_key(v[0], v[1])) {
        v = {cell[l], cell[(l + 1) % 3]};
      }
    }
    boundary_edges_.push_back({v, BoundaryTag::kNone});
    boundary_vertex_[v[0]] = true;
    boundary_vertex_[v[1]] = true;
  }

  h_max_ = 0.0;
  h_min_ = INFINITY;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const double d = diameter(c);
    h_max_ = std::max(h_max_, d);
    h_min_ = std::min(h_min_, d);
  }
}

double Mesh::signed_area(std::size_t cell) const {
  const auto& c = cells_[cell];
  return signed_area_of(vertices_[c[0]], vertices_[c[1]], vertices_[c[2]]);
}

double Mesh::diameter(std::size_t cell) const {
  const auto& c = cells_[cell];
  return std::max({distance(vertices_[c[0]], vertices_[c[1]]), distance(vertices_[c[1]], vertices_[c[2]]),
                   distance(vertices_[c[2]], vertices_[c[0]])});
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (std::size_t c = 0; c < cells_.size(); ++c) sum += signed_area(c);
  return sum;
}

void Mesh::tag_unit_square_sides() {
  constexpr double eps = 1e-12;
  for (auto& be : boundary_edges_) {
    const Point& a = vertices_[be.vertices[0]];
    const Point& b = vertices_[be.vertices[1]];
    if (std::abs(a.y) < eps && std::abs(b.y) < eps) {
      be.tag = BoundaryTag::kBottom;
    } else if (std::abs(a.x - 1.0) < eps && std::abs(b.x - 1.0) < eps) {
      be.tag = BoundaryTag::kRight;
    } else if (std::abs(a.y - 1.0) < eps && std::abs(b.y - 1.0) < eps) {
      be.tag = BoundaryTag::kTop;
    } else if (std::abs(a.x) < eps && std::abs(b.x) < eps) {
      be.tag = BoundaryTag::kLeft;
    }
  }
}

Mesh triangulate_unit_square(int n) {
  if (n < 1) throw InvalidParameter("triangulate_unit_square: n must be >= 1, got " + std::to_string(n));
  std::vector<Point> vertices;
  vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) vertices.push_back({double(i) / n, double(j) / n});
  }
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 3>> cells;
  cells.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      const double cx = (i + 0.5) / n - 0.5;
      const double cy = (j + 0.5) / n - 0.5;
      if (cx * cy >= 0.0) {
        cells.push_back({v00, v10, v11});
        cells.push_back({v00, v11, v01});
      } else {
        cells.push_back({v00, v10, v01});
        cells.push_back({v10, v11, v01});
      }
    }
  }
  Mesh mesh(std::move(vertices), std::move(cells));
  mesh.tag_unit_square_sides();
  return mesh;
}

Mesh refine_uniform(const Mesh& mesh) {
  const int nv = static_cast<int>(mesh.num_vertices());
  std::vector<Point> vertices = mesh.vertices();
  vertices.reserve(nv + mesh.num_edges());
  for (const auto& e : mesh.edges()) {
    const Point& a = mesh.vertices()[e[0]];
    const Point& b = mesh.vertices()[e[1]];
    vertices.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
  }
  std::vector<std::array<int, 3>> cells;
  std::vector<int> parents;
  cells.reserve(4 * mesh.num_cells());
  parents.reserve(4 * mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& v = mesh.cells()[c];
    const auto& e = mesh.cell_edges()[c];
    const int m01 = nv + e[0], m12 = nv + e[1], m20 = nv + e[2];
    cells.push_back({v[0], m01, m20});
    cells.push_back({m01, v[1], m12});
    cells.push_back({m20, m12, v[2]});
    cells.push_back({m01, m12, m20});
    for (int k = 0; k < 4; ++k) parents.push_back(static_cast<int>(c));
  }
  Mesh fine(std::move(vertices), std::move(cells));
  fine.parent_cells_ = std::move(parents);

  // Children of a tagged boundary edge inherit its tag: each child boundary
  // edge joins an old vertex to the midpoint vertex nv + e of its parent edge.
  std::unordered_map<std::uint64_t, BoundaryTag> parent_tags;
  for (const auto& be : mesh.boundary_edges()) parent_tags[edge_key(be.vertices[0], be.vertices[1])] = be.tag;
  for (auto& be : fine.boundary_edges_) {
    const int mid = std::max(be.vertices[0], be.vertices[1]);
    if (mid < nv) continue;
    const auto& pe = mesh.edges()[mid - nv];
    const auto it = parent_tags.find(edge_key(pe[0], pe[1]));
    if (it != parent_tags.end()) be.tag = it->second;
  }
  return fine;
}

void write_mesh_vtk(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  out << "# vtk DataFile Version 3.0\n";
  out << "slans mesh h_max=" << mesh.h_max() << " cells=" << mesh.num_cells() << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices()) out << p.x << ' ' << p.y << " 0\n";
  out << "CELLS " << mesh.num_cells() << ' ' << 4 * mesh.num_cells() << "\n";
  for (const auto& c : mesh.cells()) out << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << "\n";
  out << "CELL_TYPES " << mesh.num_cells() << "\n";
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) out << "5\n";
  std::vector<int> tag(mesh.num_vertices(), 0);
  for (const auto& be : mesh.boundary_edges()) {
    for (int v : be.vertices) tag[v] = std::max(tag[v], static_cast<int>(be.tag));
  }
  out << "POINT_DATA " << mesh.num_vertices() << "\n";
  out << "SCALARS boundary_tag int 1\nLOOKUP_TABLE default\n";
  for (int t : tag) out << t << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace slans
