#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "augsub/mesh.hpp"
#include "augsub/types.hpp"

namespace augsub {

/// Coefficients of a(u,v) = int grad u . D grad v and b(u,v) = int rho u v.
struct CoefficientField {
  std::function<Eigen::Matrix2d(double, double)> diffusion;
  std::function<double(double, double)> density;

  /// D = I, rho = 1.
  static CoefficientField laplace();
};

/// Quadrature rule on the reference triangle. Points are barycentric
/// (l0, l1, l2); weights sum to one so that an element integral is
/// area * sum(w_q f(x_q)).
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int exact_degree = 0;
};

/// Collapsed Gauss-Legendre product rule exact for polynomials of total
/// degree <= `exact_degree`.
QuadratureRule triangle_rule(int exact_degree);

/// Nodal Lagrange basis of degree k on the uniform barycentric lattice
/// {(m0,m1,m2)/k : m0+m1+m2 = k}.
class LagrangeBasis {
 public:
  explicit LagrangeBasis(int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<std::array<int, 3>>& nodes() const { return nodes_; }

  void values(const std::array<double, 3>& bary, std::span<double> out) const;
  /// Derivatives with respect to the three barycentric coordinates.
  void barycentric_gradients(const std::array<double, 3>& bary, std::span<std::array<double, 3>> out) const;

 private:
  int degree_;
  std::vector<std::array<int, 3>> nodes_;
};

/// Lagrange P_k space with homogeneous Dirichlet conditions.
///
/// Nodes are numbered lexicographically by (y, x); `interior_dofs` lists the
/// node ids that are free unknowns in that same order and `node_to_interior`
/// is its inverse (-1 on the boundary).
struct FeSpace {
  TriMesh mesh;
  int degree = 1;
  std::vector<Point2> dof_coords;
  std::vector<int> interior_dofs;
  std::vector<int> node_to_interior;
  std::vector<int> cell_to_dof;  // num_triangles x local_size, row-major

  int local_size() const { return (degree + 1) * (degree + 2) / 2; }
  std::size_t num_nodes() const { return dof_coords.size(); }
  std::size_t num_interior() const { return interior_dofs.size(); }
  std::span<const int> cell_dofs(std::size_t triangle) const {
    return {cell_to_dof.data() + triangle * local_size(), static_cast<std::size_t>(local_size())};
  }
};

FeSpace build_space(const TriMesh& mesh, int degree);

/// Stiffness (form a) and mass (form b) matrices over the free DOFs.
struct AssembledForms {
  SparseMatrix stiffness;
  SparseMatrix mass;
  std::size_t dof_count = 0;
};

struct AssemblyOptions {
  /// When false, matrices range over every node (used for checks such as the
  /// partition of unity; the stiffness matrix is then singular).
  bool eliminate_dirichlet = true;
  /// Added to the default quadrature exactness 2k.
  int extra_quadrature_degree = 0;
};

AssembledForms assemble_forms(const FeSpace& space, const CoefficientField& coeffs,
                              const AssemblyOptions& options = {});

/// Nodal injection of a nested coarse space into a fine one: rows are fine
/// free DOFs, columns coarse free DOFs. Accepts p-nesting (same mesh, lower
/// degree) and h-nesting (fine mesh refined from the coarse one).
SparseMatrix prolongation(const FeSpace& coarse, const FeSpace& fine);

Vector interpolate_nodal(const FeSpace& space, const std::function<double(double, double)>& f);

/// Matrix Market coordinate output. Symmetric matrices are written as their
/// lower triangle with the "symmetric" qualifier; indices are 1-based.
void write_matrix_market(const SparseMatrix& matrix, std::ostream& out, bool symmetric = true);

}  // namespace augsub
