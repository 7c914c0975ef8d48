#include "augsub/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "augsub/errors.hpp"

namespace augsub {

ReferenceSolution reference_eigensolve(const AssembledForms& forms, Eigen::Index m, double tolerance,
                                       const SpdSolver* solver) {
  const Eigen::Index n = forms.stiffness.rows();
  if (m < 1 || m > n) throw ConfigError("reference_eigensolve: m must lie in 1..dimension");
  const SubspaceIterationResult eig = smallest_eigenpairs(forms.stiffness, forms.mass, m, tolerance, solver);

  ReferenceSolution ref;
  ref.method = n <= kDenseEigenLimit ? "dense" : "subspace-iteration";
  ref.iterations = eig.iterations;
  ref.eigenvalues = eig.eigenvalues;
  ref.eigenvectors = eig.eigenvectors;
  // B-orthonormal -> a-orthonormal.
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector u = ref.eigenvectors.col(i);
    ref.eigenvectors.col(i) /= std::sqrt(u.dot(forms.stiffness * u));
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector u = ref.eigenvectors.col(i);
    const Vector Au = forms.stiffness * u;
    const Vector Bu = forms.mass * u;
    const double lambda = ref.eigenvalues[i];
    worst = std::max(worst, (Au - lambda * Bu).norm() / (Au.norm() + lambda * Bu.norm()));
  }
  ref.max_residual = worst;
  return ref;
}

ProjectionError projection_errors(const Vector& target, const Matrix& span, const SparseMatrix& A,
                                  const SparseMatrix& B) {
  Vector residual = target;
  if (span.cols() > 0) {
    const Matrix Q = orthonormalize_a(span, A);
    const Matrix AQ = A * Q;
    // Two projection passes keep the residual a-orthogonal to the span at
    // roundoff level even when it is tiny.
    for (int pass = 0; pass < 2; ++pass) residual -= Q * (AQ.transpose() * residual);
  }
  ProjectionError err;
  err.a = std::sqrt(std::max(0.0, residual.dot(A * residual)));
  err.b = std::sqrt(std::max(0.0, residual.dot(B * residual)));
  return err;
}

double projection_error_a(const Vector& target, const Matrix& span, const SparseMatrix& A) {
  return projection_errors(target, span, A, A).a;
}

double projection_error_b(const Vector& target, const Matrix& span, const SparseMatrix& B, const SparseMatrix& A) {
  return projection_errors(target, span, A, B).b;
}

double rayleigh_quotient(const Vector& psi, const AssembledForms& forms) {
  const double denominator = psi.dot(forms.mass * psi);
  if (!(denominator > 0.0)) throw ConfigError("rayleigh_quotient: zero vector");
  return psi.dot(forms.stiffness * psi) / denominator;
}

RayleighBoundCheck rayleigh_quotient_bound(const Vector& psi, const AssembledForms& forms, double lambda_ref,
                                           const Vector& u_ref) {
  RayleighBoundCheck check;
  check.lambda_hat = rayleigh_quotient(psi, forms);
  check.excess = check.lambda_hat - lambda_ref;
  const Vector diff = u_ref - psi;
  check.bound = diff.dot(forms.stiffness * diff) / psi.dot(forms.mass * psi);
  const double slack = 1e-12 * lambda_ref;
  check.upper_holds = check.excess <= check.bound * (1.0 + 1e-8) + slack;
  check.lower_holds = check.excess >= -slack;
  return check;
}

GapReport gap_report(const ReferenceSolution& reference, int k) {
  if (k < 1 || reference.size() <= k) throw ConfigError("gap_report: need more reference pairs than k");
  GapReport report;
  report.k = k;
  for (int i = 0; i < k; ++i) {
    double delta = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = k; j < reference.size(); ++j) {
      delta = std::min(delta, std::abs(1.0 / reference.eigenvalues[j] - 1.0 / reference.eigenvalues[i]));
    }
    report.delta.push_back(delta);
  }
  return report;
}

std::vector<double> unit_square_laplace_eigenvalues(int count) {
  std::vector<int> sums;
  const int extent = count + 1;
  for (int p = 1; p <= extent; ++p) {
    for (int q = 1; q <= extent; ++q) sums.push_back(p * p + q * q);
  }
  std::sort(sums.begin(), sums.end());
  std::vector<double> values;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  for (int i = 0; i < count; ++i) values.push_back(pi2 * sums[i]);
  return values;
}

}  // namespace augsub
