#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace augsub {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Conforming triangulation of the unit square.
///
/// Triangles are stored counterclockwise. `boundary[v]` is nonzero iff vertex
/// `v` lies on the boundary of (0,1)^2 (absolute tolerance 1e-12). `level`
/// counts regular refinements applied since construction.
struct TriMesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::uint8_t> boundary;
  int level = 0;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
};

/// n x n squares of side 1/n, each cut along its lower-left to upper-right
/// diagonal. Vertices are numbered row-major by (y, x).
TriMesh build_uniform(int n);

/// Red refinement: every triangle is split into four congruent children
/// through its edge midpoints.
TriMesh refine_regular(const TriMesh& mesh);

struct MeshStats {
  double mesh_size = 0.0;  // max triangle diameter
  std::size_t num_vertices = 0;
  std::size_t num_triangles = 0;
  std::size_t num_interior_vertices = 0;
};

MeshStats mesh_stats(const TriMesh& mesh);

double signed_area(const TriMesh& mesh, std::size_t triangle);
bool on_unit_square_boundary(const Point2& p);

/// Checks positive orientation, edge matching (no edge shared by more than two
/// triangles, unmatched edges only on the boundary), boundary flags and total
/// area. Returns false on the first violation.
bool is_conforming(const TriMesh& mesh);

/// Plain-text dump: "vertices V triangles T", then V lines "x y flag" and T
/// lines "i j k" (0-based).
void write_mesh(const TriMesh& mesh, std::ostream& out);

}  // namespace augsub
