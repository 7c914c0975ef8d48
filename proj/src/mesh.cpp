#include "augsub/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <utility>

#include "augsub/errors.hpp"

namespace augsub {

namespace {

constexpr double kBoundaryTol = 1e-12;

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

bool on_unit_square_boundary(const Point2& p) {
  return std::abs(p.x) <= kBoundaryTol || std::abs(p.x - 1.0) <= kBoundaryTol ||
         std::abs(p.y) <= kBoundaryTol || std::abs(p.y - 1.0) <= kBoundaryTol;
}

TriMesh build_uniform(int n) {
  if (n < 1) throw ConfigError("build_uniform: n must be >= 1");
  TriMesh mesh;
  const int side = n + 1;
  mesh.vertices.reserve(static_cast<std::size_t>(side) * side);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      mesh.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  mesh.triangles.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = j * side + i;
      const int v10 = v00 + 1;
      const int v01 = v00 + side;
      const int v11 = v01 + 1;
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  mesh.boundary.resize(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    mesh.boundary[v] = on_unit_square_boundary(mesh.vertices[v]) ? 1 : 0;
  }
  return mesh;
}

TriMesh refine_regular(const TriMesh& mesh) {
  TriMesh fine;
  fine.vertices = mesh.vertices;
  fine.boundary = mesh.boundary;
  fine.level = mesh.level + 1;

  std::map<std::pair<int, int>, int> midpoints;
  auto midpoint = [&](int a, int b) {
    auto [it, inserted] = midpoints.try_emplace(edge_key(a, b), static_cast<int>(fine.vertices.size()));
    if (inserted) {
      const Point2& pa = mesh.vertices[a];
      const Point2& pb = mesh.vertices[b];
      const Point2 m{0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)};
      fine.vertices.push_back(m);
      fine.boundary.push_back(on_unit_square_boundary(m) ? 1 : 0);
    }
    return it->second;
  };

  fine.triangles.reserve(4 * mesh.triangles.size());
  for (const auto& [a, b, c] : mesh.triangles) {
    const int ab = midpoint(a, b);
    const int bc = midpoint(b, c);
    const int ca = midpoint(c, a);
    fine.triangles.push_back({a, ab, ca});
    fine.triangles.push_back({ab, b, bc});
    fine.triangles.push_back({ca, bc, c});
    fine.triangles.push_back({ab, bc, ca});
  }
  return fine;
}

double signed_area(const TriMesh& mesh, std::size_t triangle) {
  const auto& t = mesh.triangles[triangle];
  const Point2& p0 = mesh.vertices[t[0]];
  const Point2& p1 = mesh.vertices[t[1]];
  const Point2& p2 = mesh.vertices[t[2]];
  return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
}

MeshStats mesh_stats(const TriMesh& mesh) {
  MeshStats stats;
  stats.num_vertices = mesh.vertices.size();
  stats.num_triangles = mesh.triangles.size();
  stats.num_interior_vertices =
      static_cast<std::size_t>(std::count(mesh.boundary.begin(), mesh.boundary.end(), 0));
  for (const auto& t : mesh.triangles) {
    const Point2& p0 = mesh.vertices[t[0]];
    const Point2& p1 = mesh.vertices[t[1]];
    const Point2& p2 = mesh.vertices[t[2]];
    stats.mesh_size = std::max({stats.mesh_size, distance(p0, p1), distance(p1, p2), distance(p2, p0)});
  }
  return stats;
}

bool is_conforming(const TriMesh& mesh) {
  if (mesh.boundary.size() != mesh.vertices.size()) return false;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if ((mesh.boundary[v] != 0) != on_unit_square_boundary(mesh.vertices[v])) return false;
  }

  double total_area = 0.0;
  std::map<std::pair<int, int>, int> edge_uses;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const double area = signed_area(mesh, t);
    if (!(area > 0.0)) return false;
    total_area += area;
    const auto& tri = mesh.triangles[t];
    for (int e = 0; e < 3; ++e) {
      if (++edge_uses[edge_key(tri[e], tri[(e + 1) % 3])] > 2) return false;
    }
  }
  if (std::abs(total_area - 1.0) > 1e-12) return false;

  // An edge used once must lie on the boundary, otherwise there is a hanging
  // node or a gap.
  for (const auto& [edge, uses] : edge_uses) {
    if (uses == 2) continue;
    const Point2& a = mesh.vertices[edge.first];
    const Point2& b = mesh.vertices[edge.second];
    const Point2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    if (!on_unit_square_boundary(a) || !on_unit_square_boundary(b) || !on_unit_square_boundary(mid)) {
      return false;
    }
  }
  return true;
}

void write_mesh(const TriMesh& mesh, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "vertices " << mesh.vertices.size() << " triangles " << mesh.triangles.size() << '\n';
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    out << mesh.vertices[v].x << ' ' << mesh.vertices[v].y << ' ' << int{mesh.boundary[v]} << '\n';
  }
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out.precision(old_precision);
}

}  // namespace augsub
