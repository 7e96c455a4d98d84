#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "slans/error.hpp"
#include "slans/mesh.hpp"
#include "slans/quadrature.hpp"

using namespace slans;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Exact integral of x^a y^b over the reference triangle.
double monomial_integral(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

double apply_rule(const QuadratureRule& r, int a, int b) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) {
    const double x = r.points[q][1], y = r.points[q][2];
    s += r.weights[q] * std::pow(x, a) * std::pow(y, b);
  }
  return s;
}

}  // namespace

TEST(Quadrature, DunavantExactToDeclaredDegree) {
  for (int deg = 1; deg <= 6; ++deg) {
    const QuadratureRule r = dunavant_rule(deg);
    EXPECT_GE(r.degree, deg);
    double wsum = 0.0;
    for (double w : r.weights) wsum += w;
    EXPECT_NEAR(wsum, 0.5, 1e-15);
    for (int a = 0; a <= deg; ++a) {
      for (int b = 0; a + b <= deg; ++b) {
        EXPECT_NEAR(apply_rule(r, a, b), monomial_integral(a, b), 1e-15) << "deg " << deg << " x^" << a << " y^" << b;
      }
    }
  }
}

TEST(Quadrature, CollapsedGaussExactness) {
  const QuadratureRule r = collapsed_gauss_rule(5);
  for (int a = 0; a <= 8; ++a) {
    for (int b = 0; a + b <= 8; ++b) EXPECT_NEAR(apply_rule(r, a, b), monomial_integral(a, b), 1e-15);
  }
}

TEST(Quadrature, BarycentricPointsSumToOne) {
  for (int deg : {1, 2, 3, 4, 5, 6}) {
    for (const auto& p : dunavant_rule(deg).points) EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
  }
}

TEST(Mesh, SmallestMesh) {
  const Mesh m = triangulate_unit_square(1);
  EXPECT_EQ(m.num_cells(), 2u);
  EXPECT_EQ(m.num_vertices(), 4u);
  EXPECT_NEAR(m.h_max(), std::sqrt(2.0), 1e-15);
}

TEST(Mesh, TwoByTwoCounts) {
  const Mesh m = triangulate_unit_square(2);
  EXPECT_EQ(m.num_cells(), 8u);
  EXPECT_EQ(m.num_vertices(), 9u);
  EXPECT_EQ(m.boundary_edges().size(), 8u);
  // Euler: V - E + F = 1 for a disc.
  EXPECT_EQ(static_cast<long>(m.num_vertices()) - static_cast<long>(m.num_edges()) + static_cast<long>(m.num_cells()), 1);
}

TEST(Mesh, RealizedMeshSizes) {
  EXPECT_NEAR(triangulate_unit_square(33).h_max(), std::sqrt(2.0) / 33, 1e-15);
  EXPECT_NEAR(triangulate_unit_square(33).h_max(), 0.0429, 1e-4);
  EXPECT_NEAR(triangulate_unit_square(48).h_max(), 0.0295, 1e-4);
}

TEST(Mesh, RejectsZeroCells) {
  EXPECT_THROW(triangulate_unit_square(0), InvalidParameter);
  EXPECT_THROW(triangulate_unit_square(-3), InvalidParameter);
}

TEST(Mesh, OrientationAreaAndConformity) {
  for (int n : {1, 3, 8}) {
    const Mesh m = triangulate_unit_square(n);
    for (std::size_t c = 0; c < m.num_cells(); ++c) EXPECT_GT(m.signed_area(c), 0.0);
    EXPECT_NEAR(m.total_area(), 1.0, 1e-12);
    std::map<std::pair<int, int>, int> count;
    for (const auto& cell : m.cells()) {
      for (int e = 0; e < 3; ++e) {
        int a = cell[e], b = cell[(e + 1) % 3];
        if (a > b) std::swap(a, b);
        ++count[{a, b}];
      }
    }
    std::size_t boundary = 0;
    for (const auto& [edge, k] : count) {
      EXPECT_LE(k, 2);
      if (k == 1) ++boundary;
    }
    EXPECT_EQ(boundary, m.boundary_edges().size());
    EXPECT_EQ(count.size(), m.num_edges());
  }
}

TEST(Mesh, BoundaryTags) {
  const Mesh m = triangulate_unit_square(4);
  std::map<BoundaryTag, int> per_side;
  for (const auto& e : m.boundary_edges()) {
    EXPECT_NE(e.tag, BoundaryTag::kNone);
    ++per_side[e.tag];
  }
  for (auto t : {BoundaryTag::kBottom, BoundaryTag::kRight, BoundaryTag::kTop, BoundaryTag::kLeft}) EXPECT_EQ(per_side[t], 4);
}

TEST(Mesh, NoCellWithThreeBoundaryVertices) {
  const Mesh m = triangulate_unit_square(6);
  for (const auto& c : m.cells()) {
    EXPECT_FALSE(m.is_boundary_vertex(c[0]) && m.is_boundary_vertex(c[1]) && m.is_boundary_vertex(c[2]));
  }
}

TEST(Mesh, RefineOneCellMesh) {
  const Mesh m = refine_uniform(triangulate_unit_square(1));
  EXPECT_EQ(m.num_cells(), 8u);
  EXPECT_EQ(m.parent_cells().size(), 8u);
}

TEST(Mesh, RefineTwiceQuartersMeshSize) {
  const Mesh m0 = triangulate_unit_square(3);
  const Mesh m2 = refine_uniform(refine_uniform(m0));
  EXPECT_NEAR(m2.h_max(), m0.h_max() / 4, 1e-14);
  EXPECT_NEAR(m2.quasi_uniformity(), m0.quasi_uniformity(), 1e-12);
  EXPECT_EQ(m2.num_cells(), 16 * m0.num_cells());
  EXPECT_NEAR(m2.total_area(), m0.total_area(), 1e-12);
  for (std::size_t c = 0; c < m2.num_cells(); ++c) EXPECT_GT(m2.signed_area(c), 0.0);
  EXPECT_EQ(m2.boundary_edges().size(), 4 * m0.boundary_edges().size());
}

TEST(Mesh, QuasiUniformityBounded) {
  Mesh m = triangulate_unit_square(2);
  for (int l = 0; l < 4; ++l) {
    EXPECT_LE(m.quasi_uniformity(), 2.0);
    m = refine_uniform(m);
  }
}

TEST(Mesh, RejectsDegenerateCell) {
  std::vector<Point> v{{0, 0}, {1, 0}, {2, 0}};
  EXPECT_THROW(Mesh(v, {{0, 1, 2}}), InvalidParameter);
}

TEST(Mesh, ReorientsClockwiseCells) {
  std::vector<Point> v{{0, 0}, {1, 0}, {0, 1}};
  const Mesh m(v, {{0, 2, 1}});
  EXPECT_NEAR(m.signed_area(0), 0.5, 1e-15);
}

TEST(Mesh, VtkDump) {
  const auto path = std::filesystem::temp_directory_path() / "slans_test_mesh.vtk";
  write_mesh_vtk(triangulate_unit_square(2), path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("DATASET UNSTRUCTURED_GRID"), std::string::npos);
  EXPECT_NE(text.find("POINTS 9 double"), std::string::npos);
  EXPECT_NE(text.find("CELLS 8 32"), std::string::npos);
  std::filesystem::remove(path);
}
