#pragma once

#include <array>
#include <filesystem>
#include <vector>

namespace slans {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Boundary side tags of the unit square; 0 marks an untagged boundary.
enum class BoundaryTag : int { kNone = 0, kBottom = 1, kRight = 2, kTop = 3, kLeft = 4 };

struct BoundaryEdge {
  std::array<int, 2> vertices;
  BoundaryTag tag = BoundaryTag::kNone;
};

/// Conforming triangulation of a polygon. Immutable after construction.
///
/// Local edge e of a cell joins local vertices e and (e+1)%3. Edges are
/// numbered globally; `cell_edges` maps each cell to its three global edges.
class Mesh {
 public:
  /// Builds connectivity for the given cells. Cells with negative signed area
  /// are reoriented; degenerate cells are rejected.
  Mesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> cells);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& cells() const { return cells_; }
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  const std::vector<std::array<int, 3>>& cell_edges() const { return cell_edges_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
  /// For each edge, the two adjacent cells (second is -1 on the boundary).
  const std::vector<std::array<int, 2>>& edge_cells() const { return edge_cells_; }
  /// Parent cell in the coarser mesh; empty unless produced by refine_uniform.
  const std::vector<int>& parent_cells() const { return parent_cells_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  double h_max() const { return h_max_; }
  double h_min() const { return h_min_; }
  double quasi_uniformity() const { return h_max_ / h_min_; }

  double signed_area(std::size_t cell) const;
  double diameter(std::size_t cell) const;
  double total_area() const;

  bool is_boundary_vertex(std::size_t v) const { return boundary_vertex_[v]; }
  bool is_boundary_edge(std::size_t e) const { return edge_cells_[e][1] < 0; }

  /// Tags boundary edges by the unit-square side they lie on.
  void tag_unit_square_sides();

 private:
  friend Mesh refine_uniform(const Mesh& mesh);

  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> cells_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 3>> cell_edges_;
  std::vector<std::array<int, 2>> edge_cells_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<bool> boundary_vertex_;
  std::vector<int> parent_cells_;
  double h_max_ = 0.0;
  double h_min_ = 0.0;
};

/// Structured triangulation of (0,1)^2 with n x n squares, each split into two
/// right triangles. Diagonals run towards the nearest domain corner, so no
/// triangle has all three vertices on the boundary (for n >= 2).
Mesh triangulate_unit_square(int n);

/// Red refinement: every cell is split into four similar children through its
/// edge midpoints.
Mesh refine_uniform(const Mesh& mesh);

/// Legacy ASCII VTK (UNSTRUCTURED_GRID, linear triangles) with the boundary
/// tag of each vertex as point data.
void write_mesh_vtk(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace slans
