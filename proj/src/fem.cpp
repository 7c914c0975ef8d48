#include "augsub/fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <utility>

#include <boost/math/quadrature/gauss.hpp>

#include "augsub/errors.hpp"

namespace augsub {

namespace {

// Lattice coordinates of every supported space are of the form i / (k * 2^r)
// with k <= 4, so scaling by 3 * 2^32 maps them to integers exactly.
constexpr double kCoordScale = 3.0 * 4294967296.0;

using CoordKey = std::pair<long long, long long>;  // (y, x) for lexicographic order

CoordKey coord_key(const Point2& p) {
  return {std::llround(p.y * kCoordScale), std::llround(p.x * kCoordScale)};
}

struct GaussRule1d {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

template <unsigned N>
GaussRule1d gauss_on_unit_interval() {
  using Rule = boost::math::quadrature::gauss<double, N>;
  const auto& abscissa = Rule::abscissa();
  const auto& weights = Rule::weights();
  GaussRule1d rule;
  for (std::size_t i = 0; i < abscissa.size(); ++i) {
    const double x = abscissa[i];
    const double w = weights[i];
    if (x == 0.0) {
      rule.nodes.push_back(0.5);
      rule.weights.push_back(0.5 * w);
    } else {
      rule.nodes.push_back(0.5 * (1.0 - x));
      rule.weights.push_back(0.5 * w);
      rule.nodes.push_back(0.5 * (1.0 + x));
      rule.weights.push_back(0.5 * w);
    }
  }
  return rule;
}

GaussRule1d gauss_rule(int points) {
  switch (points) {
    case 1: return {{0.5}, {1.0}};
    case 2: return gauss_on_unit_interval<2>();
    case 3: return gauss_on_unit_interval<3>();
    case 4: return gauss_on_unit_interval<4>();
    case 5: return gauss_on_unit_interval<5>();
    case 6: return gauss_on_unit_interval<6>();
    case 7: return gauss_on_unit_interval<7>();
    case 8: return gauss_on_unit_interval<8>();
    case 9: return gauss_on_unit_interval<9>();
    case 10: return gauss_on_unit_interval<10>();
    default: throw ConfigError("triangle_rule: requested exactness is too high");
  }
}

std::array<double, 3> barycentric(const Point2& p, const Point2& p0, const Point2& p1, const Point2& p2) {
  const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
  const double l1 = ((p.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p.y - p0.y)) / det;
  const double l2 = ((p1.x - p0.x) * (p.y - p0.y) - (p.x - p0.x) * (p1.y - p0.y)) / det;
  return {1.0 - l1 - l2, l1, l2};
}

/// Uniform bucket grid over the unit square for locating points in triangles.
class TriangleLocator {
 public:
  explicit TriangleLocator(const TriMesh& mesh) : mesh_(mesh) {
    cells_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_triangles()) / 2.0)));
    buckets_.resize(static_cast<std::size_t>(cells_) * cells_);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
      for (int v : mesh.triangles[t]) {
        xmin = std::min(xmin, mesh.vertices[v].x);
        xmax = std::max(xmax, mesh.vertices[v].x);
        ymin = std::min(ymin, mesh.vertices[v].y);
        ymax = std::max(ymax, mesh.vertices[v].y);
      }
      for (int j = cell_of(ymin - 1e-12); j <= cell_of(ymax + 1e-12); ++j) {
        for (int i = cell_of(xmin - 1e-12); i <= cell_of(xmax + 1e-12); ++i) {
          buckets_[static_cast<std::size_t>(j) * cells_ + i].push_back(static_cast<int>(t));
        }
      }
    }
  }

  /// Returns (triangle, barycentric coordinates) or triangle -1 when outside.
  std::pair<int, std::array<double, 3>> locate(const Point2& p) const {
    const auto& bucket = buckets_[static_cast<std::size_t>(cell_of(p.y)) * cells_ + cell_of(p.x)];
    for (int t : bucket) {
      const auto& tri = mesh_.triangles[t];
      const auto bary = barycentric(p, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
      if (bary[0] >= -kInsideTol && bary[1] >= -kInsideTol && bary[2] >= -kInsideTol) return {t, bary};
    }
    return {-1, {}};
  }

  static constexpr double kInsideTol = 1e-10;

 private:
  int cell_of(double coord) const {
    return std::clamp(static_cast<int>(std::floor(coord * cells_)), 0, cells_ - 1);
  }

  const TriMesh& mesh_;
  int cells_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace

CoefficientField CoefficientField::laplace() {
  return {[](double, double) { return Eigen::Matrix2d::Identity().eval(); }, [](double, double) { return 1.0; }};
}

QuadratureRule triangle_rule(int exact_degree) {
  if (exact_degree < 0) throw ConfigError("triangle_rule: negative degree");
  // Duffy map (u, v) -> (u, v (1 - u)) raises the u-degree by one.
  const int points = std::max(1, (exact_degree + 3) / 2);
  const GaussRule1d line = gauss_rule(points);
  QuadratureRule rule;
  rule.exact_degree = exact_degree;
  for (std::size_t i = 0; i < line.nodes.size(); ++i) {
    for (std::size_t j = 0; j < line.nodes.size(); ++j) {
      const double u = line.nodes[i];
      const double v = line.nodes[j];
      const double xi = u;
      const double eta = v * (1.0 - u);
      rule.points.push_back({1.0 - xi - eta, xi, eta});
      rule.weights.push_back(2.0 * line.weights[i] * line.weights[j] * (1.0 - u));
    }
  }
  return rule;
}

LagrangeBasis::LagrangeBasis(int degree) : degree_(degree) {
  if (degree < 1 || degree > 4) throw ConfigError("LagrangeBasis: degree must be in 1..4");
  for (int m1 = 0; m1 <= degree; ++m1) {
    for (int m2 = 0; m1 + m2 <= degree; ++m2) nodes_.push_back({degree - m1 - m2, m1, m2});
  }
}

namespace {

// L_m(t) = prod_{s<m} (k t - s) / (m - s): one at t = m/k, zero at t = s/k, s < m.
double lattice_factor(int k, int m, double t) {
  double value = 1.0;
  for (int s = 0; s < m; ++s) value *= (k * t - s) / (m - s);
  return value;
}

double lattice_factor_derivative(int k, int m, double t) {
  double sum = 0.0;
  for (int s = 0; s < m; ++s) {
    double term = static_cast<double>(k) / (m - s);
    for (int r = 0; r < m; ++r) {
      if (r != s) term *= (k * t - r) / (m - r);
    }
    sum += term;
  }
  return sum;
}

}  // namespace

void LagrangeBasis::values(const std::array<double, 3>& bary, std::span<double> out) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& m = nodes_[i];
    out[i] = lattice_factor(degree_, m[0], bary[0]) * lattice_factor(degree_, m[1], bary[1]) *
             lattice_factor(degree_, m[2], bary[2]);
  }
}

void LagrangeBasis::barycentric_gradients(const std::array<double, 3>& bary,
                                          std::span<std::array<double, 3>> out) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& m = nodes_[i];
    std::array<double, 3> f{};
    std::array<double, 3> df{};
    for (int a = 0; a < 3; ++a) {
      f[a] = lattice_factor(degree_, m[a], bary[a]);
      df[a] = lattice_factor_derivative(degree_, m[a], bary[a]);
    }
    out[i] = {df[0] * f[1] * f[2], f[0] * df[1] * f[2], f[0] * f[1] * df[2]};
  }
}

FeSpace build_space(const TriMesh& mesh, int degree) {
  if (degree < 1 || degree > 4) throw ConfigError("build_space: degree must be in 1..4");
  const LagrangeBasis basis(degree);
  const int nloc = basis.size();

  FeSpace space;
  space.mesh = mesh;
  space.degree = degree;
  space.cell_to_dof.resize(mesh.num_triangles() * nloc);

  std::map<CoordKey, int> ids;
  std::vector<Point2> coords;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < nloc; ++i) {
      const auto& m = basis.nodes()[i];
      Point2 p{0.0, 0.0};
      for (int a = 0; a < 3; ++a) {
        p.x += m[a] * mesh.vertices[tri[a]].x;
        p.y += m[a] * mesh.vertices[tri[a]].y;
      }
      p.x /= degree;
      p.y /= degree;
      auto [it, inserted] = ids.try_emplace(coord_key(p), static_cast<int>(coords.size()));
      if (inserted) coords.push_back(p);
      space.cell_to_dof[t * nloc + i] = it->second;
    }
  }

  // std::map iterates in (y, x) order; renumber to that order.
  std::vector<int> renumber(coords.size());
  space.dof_coords.reserve(coords.size());
  for (const auto& [key, old_id] : ids) {
    renumber[old_id] = static_cast<int>(space.dof_coords.size());
    space.dof_coords.push_back(coords[old_id]);
  }
  for (int& dof : space.cell_to_dof) dof = renumber[dof];

  space.node_to_interior.assign(space.dof_coords.size(), -1);
  for (std::size_t n = 0; n < space.dof_coords.size(); ++n) {
    if (!on_unit_square_boundary(space.dof_coords[n])) {
      space.node_to_interior[n] = static_cast<int>(space.interior_dofs.size());
      space.interior_dofs.push_back(static_cast<int>(n));
    }
  }
  return space;
}

AssembledForms assemble_forms(const FeSpace& space, const CoefficientField& coeffs,
                              const AssemblyOptions& options) {
  const LagrangeBasis basis(space.degree);
  const int nloc = basis.size();
  const QuadratureRule rule = triangle_rule(2 * space.degree + options.extra_quadrature_degree);
  const std::size_t nq = rule.weights.size();

  // Reference tables are shared by every element.
  std::vector<double> phi(nq * nloc);
  std::vector<std::array<double, 3>> dphi(nq * nloc);
  for (std::size_t q = 0; q < nq; ++q) {
    basis.values(rule.points[q], std::span(phi).subspan(q * nloc, nloc));
    basis.barycentric_gradients(rule.points[q], std::span(dphi).subspan(q * nloc, nloc));
  }

  auto global_index = [&](int node) {
    return options.eliminate_dirichlet ? space.node_to_interior[node] : node;
  };
  const std::size_t ndof = options.eliminate_dirichlet ? space.num_interior() : space.num_nodes();

  std::vector<Eigen::Triplet<double>> stiffness_entries;
  std::vector<Eigen::Triplet<double>> mass_entries;
  stiffness_entries.reserve(space.mesh.num_triangles() * nloc * nloc);
  mass_entries.reserve(space.mesh.num_triangles() * nloc * nloc);

  Matrix local_stiffness(nloc, nloc);
  Matrix local_mass(nloc, nloc);
  std::vector<Eigen::Vector2d> grads(nloc);

  for (std::size_t t = 0; t < space.mesh.num_triangles(); ++t) {
    const auto& tri = space.mesh.triangles[t];
    const Point2& p0 = space.mesh.vertices[tri[0]];
    const Point2& p1 = space.mesh.vertices[tri[1]];
    const Point2& p2 = space.mesh.vertices[tri[2]];
    const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    const double area = 0.5 * det;
    const std::array<Eigen::Vector2d, 3> grad_bary{
        Eigen::Vector2d{(p1.y - p2.y) / det, (p2.x - p1.x) / det},
        Eigen::Vector2d{(p2.y - p0.y) / det, (p0.x - p2.x) / det},
        Eigen::Vector2d{(p0.y - p1.y) / det, (p1.x - p0.x) / det}};

    local_stiffness.setZero();
    local_mass.setZero();
    for (std::size_t q = 0; q < nq; ++q) {
      const auto& l = rule.points[q];
      const double x = l[0] * p0.x + l[1] * p1.x + l[2] * p2.x;
      const double y = l[0] * p0.y + l[1] * p1.y + l[2] * p2.y;
      const Eigen::Matrix2d diffusion = coeffs.diffusion(x, y);
      const double density = coeffs.density(x, y);
      if (!(density > 0.0) || !(diffusion(0, 0) > 0.0) || !(diffusion.determinant() > 0.0)) {
        throw ConfigError("assemble_forms: coefficient is not positive at (" + std::to_string(x) + ", " +
                          std::to_string(y) + ")");
      }
      const Eigen::Matrix2d sym = 0.5 * (diffusion + diffusion.transpose());
      const double w = rule.weights[q] * area;
      for (int i = 0; i < nloc; ++i) {
        const auto& d = dphi[q * nloc + i];
        grads[i] = d[0] * grad_bary[0] + d[1] * grad_bary[1] + d[2] * grad_bary[2];
      }
      for (int i = 0; i < nloc; ++i) {
        const Eigen::Vector2d flux = sym * grads[i];
        const double wphi = w * density * phi[q * nloc + i];
        for (int j = i; j < nloc; ++j) {
          local_stiffness(i, j) += w * flux.dot(grads[j]);
          local_mass(i, j) += wphi * phi[q * nloc + j];
        }
      }
    }

    const auto dofs = space.cell_dofs(t);
    for (int i = 0; i < nloc; ++i) {
      const int gi = global_index(dofs[i]);
      if (gi < 0) continue;
      for (int j = 0; j < nloc; ++j) {
        const int gj = global_index(dofs[j]);
        if (gj < 0) continue;
        const int lo = std::min(i, j);
        const int hi = std::max(i, j);
        stiffness_entries.emplace_back(gi, gj, local_stiffness(lo, hi));
        mass_entries.emplace_back(gi, gj, local_mass(lo, hi));
      }
    }
  }

  AssembledForms forms;
  forms.dof_count = ndof;
  forms.stiffness.resize(static_cast<Eigen::Index>(ndof), static_cast<Eigen::Index>(ndof));
  forms.mass.resize(static_cast<Eigen::Index>(ndof), static_cast<Eigen::Index>(ndof));
  forms.stiffness.setFromTriplets(stiffness_entries.begin(), stiffness_entries.end());
  forms.mass.setFromTriplets(mass_entries.begin(), mass_entries.end());
  return forms;
}

SparseMatrix prolongation(const FeSpace& coarse, const FeSpace& fine) {
  if (coarse.degree > fine.degree) {
    throw ConfigError("prolongation: coarse degree exceeds fine degree, spaces are not nested");
  }
  const TriangleLocator locator(coarse.mesh);

  // Nesting: every fine triangle must sit inside one coarse triangle.
  for (const auto& tri : fine.mesh.triangles) {
    Point2 centroid{0.0, 0.0};
    for (int v : tri) {
      centroid.x += fine.mesh.vertices[v].x / 3.0;
      centroid.y += fine.mesh.vertices[v].y / 3.0;
    }
    const auto [host, bary_c] = locator.locate(centroid);
    if (host < 0) throw ConfigError("prolongation: fine mesh leaves the coarse domain");
    const auto& ctri = coarse.mesh.triangles[host];
    for (int v : tri) {
      const auto bary = barycentric(fine.mesh.vertices[v], coarse.mesh.vertices[ctri[0]],
                                    coarse.mesh.vertices[ctri[1]], coarse.mesh.vertices[ctri[2]]);
      if (std::min({bary[0], bary[1], bary[2]}) < -TriangleLocator::kInsideTol) {
        throw ConfigError("prolongation: fine mesh is not a refinement of the coarse mesh");
      }
    }
  }

  const LagrangeBasis basis(coarse.degree);
  const int nloc = basis.size();
  std::vector<double> values(nloc);
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t row = 0; row < fine.num_interior(); ++row) {
    const Point2& p = fine.dof_coords[fine.interior_dofs[row]];
    const auto [host, bary] = locator.locate(p);
    if (host < 0) throw ConfigError("prolongation: fine node outside the coarse mesh");
    basis.values(bary, values);
    const auto dofs = coarse.cell_dofs(static_cast<std::size_t>(host));
    for (int i = 0; i < nloc; ++i) {
      const int col = coarse.node_to_interior[dofs[i]];
      if (col >= 0 && std::abs(values[i]) > 1e-13) entries.emplace_back(static_cast<int>(row), col, values[i]);
    }
  }
  SparseMatrix P(static_cast<Eigen::Index>(fine.num_interior()), static_cast<Eigen::Index>(coarse.num_interior()));
  P.setFromTriplets(entries.begin(), entries.end());
  return P;
}

Vector interpolate_nodal(const FeSpace& space, const std::function<double(double, double)>& f) {
  Vector values(static_cast<Eigen::Index>(space.num_interior()));
  for (std::size_t i = 0; i < space.num_interior(); ++i) {
    const Point2& p = space.dof_coords[space.interior_dofs[i]];
    values[static_cast<Eigen::Index>(i)] = f(p.x, p.y);
  }
  return values;
}

void write_matrix_market(const SparseMatrix& matrix, std::ostream& out, bool symmetric) {
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> entries;
  for (Eigen::Index col = 0; col < matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
      if (symmetric && it.row() < it.col()) continue;
      entries.emplace_back(it.row(), it.col(), it.value());
    }
  }
  const auto old_precision = out.precision(17);
  out << "%%MatrixMarket matrix coordinate real " << (symmetric ? "symmetric" : "general") << '\n';
  out << matrix.rows() << ' ' << matrix.cols() << ' ' << entries.size() << '\n';
  for (const auto& [row, col, value] : entries) out << row + 1 << ' ' << col + 1 << ' ' << value << '\n';
  out.precision(old_precision);
}

}  // namespace augsub
