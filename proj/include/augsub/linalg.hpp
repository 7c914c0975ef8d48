#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "augsub/types.hpp"

namespace augsub {

enum class SolveMethod { Auto, Direct, Iterative };

/// Solver for a fixed sparse SPD matrix.
///
/// Auto picks a sparse Cholesky factorization up to `kDirectLimit` unknowns
/// and Jacobi-preconditioned CG beyond. Every returned x has normwise
/// backward error ||Ax - b|| / (||A|| ||x|| + ||b||) <= tolerance in the
/// infinity norm; the direct path adds iterative refinement when the plain
/// triangular solves fall short. The object is
/// immutable after construction, so concurrent solves are allowed.
class SpdSolver {
 public:
  static constexpr Eigen::Index kDirectLimit = 200000;

  explicit SpdSolver(const SparseMatrix& A, double tolerance = 1e-12, SolveMethod method = SolveMethod::Auto);
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& B) const;

  Eigen::Index size() const;
  double tolerance() const { return tolerance_; }
  bool is_direct() const { return factor_ != nullptr; }

 private:
  struct Factor;
  Vector solve_direct(const Vector& b) const;
  Vector solve_cg(const Vector& b) const;
  double backward_error(const Vector& b, const Vector& x, const Vector& r) const;

  SparseMatrix matrix_;
  double tolerance_;
  double norm_inf_ = 0.0;
  std::unique_ptr<Factor> factor_;
  Vector inverse_diagonal_;
};

Vector solve_spd(const SparseMatrix& A, const Vector& b, double tol = 1e-12);

/// Result of a small symmetric-definite eigenproblem. Eigenvalues ascend;
/// eigenvector columns are orthonormal in the inner product of the second
/// matrix, with the largest-magnitude entry of each column positive.
struct DenseEigResult {
  Vector eigenvalues;
  Matrix eigenvectors;
  Eigen::Index retained_dimension = 0;
};

/// Solves A v = lambda B v with B symmetric positive semidefinite. Directions
/// of B whose eigenvalue falls below drop_tol * max eigenvalue are discarded
/// before the reduced standard problem is solved.
DenseEigResult dense_gen_eig(const Matrix& A, const Matrix& B, double drop_tol = 1e-12);

/// (Z^T A Z, Z^T B Z), each symmetrized as (M + M^T) / 2.
std::pair<Matrix, Matrix> project_forms(const Matrix& Z, const SparseMatrix& A, const SparseMatrix& B);

/// Modified Gram-Schmidt in the A inner product, two passes. A column whose
/// A-norm after projection drops below drop_tol times its original A-norm is
/// discarded.
Matrix orthonormalize_a(const Matrix& V, const SparseMatrix& A, double drop_tol = 1e-10);

/// Flips each column so that its largest-magnitude entry is positive.
void normalize_signs(Matrix& vectors);

using BlockOperator = std::function<Matrix(const Matrix&)>;

struct SubspaceIterationOptions {
  Eigen::Index wanted = 1;
  Eigen::Index block_size = 0;  // 0: wanted + 10
  double tolerance = 1e-13;     // relative residual of each wanted pair
  int max_iterations = 2000;
  /// When the residual stops improving it is accepted if below
  /// stagnation_factor * tolerance.
  double stagnation_factor = 100.0;
};

struct SubspaceIterationResult {
  Vector eigenvalues;
  Matrix eigenvectors;  // B-orthonormal
  int iterations = 0;
  double max_residual = 0.0;
};

/// Smallest eigenpairs of A x = lambda B x by block inverse (shift zero)
/// subspace iteration with Rayleigh-Ritz. `solve_a` applies A^{-1}; the start
/// block supplies the initial subspace (padded with deterministic random
/// columns up to the block size).
SubspaceIterationResult inverse_subspace_iteration(const BlockOperator& apply_a, const BlockOperator& apply_b,
                                                   const BlockOperator& solve_a, const Matrix& start,
                                                   const SubspaceIterationOptions& options);

/// Dense path for small problems, iterative path otherwise.
SubspaceIterationResult smallest_eigenpairs(const SparseMatrix& A, const SparseMatrix& B, Eigen::Index wanted,
                                            double tolerance = 1e-13, const SpdSolver* solver = nullptr);

/// Dimension up to which smallest_eigenpairs uses dense_gen_eig.
inline constexpr Eigen::Index kDenseEigenLimit = 2000;

}  // namespace augsub
