#pragma once

#include <string>
#include <vector>

#include "augsub/fem.hpp"
#include "augsub/linalg.hpp"

namespace augsub {

/// First m fine-space eigenpairs, eigenvalues ascending and eigenvectors
/// a-orthonormal (u^T A u = 1).
struct ReferenceSolution {
  Vector eigenvalues;
  Matrix eigenvectors;
  std::string method;  // "dense" or "subspace-iteration"
  int iterations = 0;
  double max_residual = 0.0;

  Eigen::Index size() const { return eigenvalues.size(); }
};

/// Direct solve of the fine problem: dense when small, shift-invert block
/// subspace iteration otherwise. Pass the fine stiffness solver to reuse its
/// factorization.
ReferenceSolution reference_eigensolve(const AssembledForms& forms, Eigen::Index m, double tolerance = 1e-13,
                                       const SpdSolver* solver = nullptr);

/// Residual of target after a-orthogonal projection onto span(columns).
struct ProjectionError {
  double a = 0.0;
  double b = 0.0;
};

ProjectionError projection_errors(const Vector& target, const Matrix& span, const SparseMatrix& A,
                                  const SparseMatrix& B);
double projection_error_a(const Vector& target, const Matrix& span, const SparseMatrix& A);
double projection_error_b(const Vector& target, const Matrix& span, const SparseMatrix& B, const SparseMatrix& A);

/// Rayleigh quotient psi^T A psi / psi^T B psi.
double rayleigh_quotient(const Vector& psi, const AssembledForms& forms);

/// Checks 0 <= lambda_hat - lambda_ref <= ||u_ref - psi||_a^2 / ||psi||_b^2.
/// The lower bound is only guaranteed when lambda_ref is the smallest
/// eigenvalue or psi has no components below it, so it is reported separately.
struct RayleighBoundCheck {
  double lambda_hat = 0.0;
  double excess = 0.0;  // lambda_hat - lambda_ref
  double bound = 0.0;   // ||u_ref - psi||_a^2 / ||psi||_b^2
  bool upper_holds = false;
  bool lower_holds = false;
};

RayleighBoundCheck rayleigh_quotient_bound(const Vector& psi, const AssembledForms& forms, double lambda_ref,
                                           const Vector& u_ref);

/// delta_{k,i} = min_{k < j <= m} |1/lambda_j - 1/lambda_i| for i = 1..k.
struct GapReport {
  int k = 0;
  std::vector<double> delta;  // delta[i-1]
};

GapReport gap_report(const ReferenceSolution& reference, int k);

/// Continuum Dirichlet Laplacian eigenvalues of the unit square,
/// pi^2 (p^2 + q^2), sorted, first `count` (with multiplicity).
std::vector<double> unit_square_laplace_eigenvalues(int count);

}  // namespace augsub
