#include "augsub/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>

#include "augsub/errors.hpp"

namespace augsub {

struct SpdSolver::Factor {
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

SpdSolver::SpdSolver(const SparseMatrix& A, double tolerance, SolveMethod method)
    : matrix_(A), tolerance_(tolerance) {
  if (A.rows() != A.cols()) throw ConfigError("SpdSolver: matrix is not square");
  Vector row_sums = Vector::Zero(A.rows());
  for (int j = 0; j < matrix_.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(matrix_, j); it; ++it) row_sums[it.row()] += std::abs(it.value());
  }
  norm_inf_ = row_sums.size() > 0 ? row_sums.maxCoeff() : 0.0;
  const bool direct =
      method == SolveMethod::Direct || (method == SolveMethod::Auto && A.rows() <= kDirectLimit);
  if (direct) {
    factor_ = std::make_unique<Factor>();
    factor_->llt.compute(matrix_);
    if (factor_->llt.info() != Eigen::Success) {
      throw SolverBreakdown("SpdSolver: Cholesky factorization hit a non-positive pivot");
    }
  } else {
    const Vector diagonal = matrix_.diagonal();
    if ((diagonal.array() <= 0.0).any()) throw SolverBreakdown("SpdSolver: non-positive diagonal entry");
    inverse_diagonal_ = diagonal.cwiseInverse();
  }
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

Eigen::Index SpdSolver::size() const { return matrix_.rows(); }

Vector SpdSolver::solve(const Vector& b) const {
  if (b.size() != matrix_.rows()) throw ConfigError("SpdSolver: right-hand side has the wrong size");
  if (b.squaredNorm() == 0.0) return Vector::Zero(b.size());
  return factor_ ? solve_direct(b) : solve_cg(b);
}

Matrix SpdSolver::solve(const Matrix& B) const {
  Matrix X(B.rows(), B.cols());
  for (Eigen::Index j = 0; j < B.cols(); ++j) X.col(j) = solve(Vector(B.col(j)));
  return X;
}

double SpdSolver::backward_error(const Vector& b, const Vector& x, const Vector& r) const {
  return r.lpNorm<Eigen::Infinity>() / (norm_inf_ * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>());
}

Vector SpdSolver::solve_direct(const Vector& b) const {
  Vector x = factor_->llt.solve(b);
  if (!x.allFinite()) throw SolverBreakdown("SpdSolver: non-finite solution");
  Vector r = b - matrix_ * x;
  double error = backward_error(b, x, r);
  for (int step = 0; step < 5 && error > tolerance_; ++step) {
    const Vector candidate = x + factor_->llt.solve(r);
    const Vector candidate_r = b - matrix_ * candidate;
    const double candidate_error = backward_error(b, candidate, candidate_r);
    if (!(candidate_error < error)) break;
    x = candidate;
    r = candidate_r;
    error = candidate_error;
  }
  if (error > tolerance_) throw NotConverged("SpdSolver: refinement stalled", error);
  return x;
}

Vector SpdSolver::solve_cg(const Vector& b) const {
  const Eigen::Index n = b.size();
  const int max_iterations = static_cast<int>(std::max<Eigen::Index>(1000, 10 * n));
  Vector x = Vector::Zero(n);
  Vector r = b;
  Vector z = inverse_diagonal_.cwiseProduct(r);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 0; it < max_iterations; ++it) {
    const Vector Ap = matrix_ * p;
    const double curvature = p.dot(Ap);
    if (!(curvature > 0.0)) throw SolverBreakdown("SpdSolver: non-positive curvature in CG");
    const double alpha = rz / curvature;
    x += alpha * p;
    r -= alpha * Ap;
    if (backward_error(b, x, r) <= tolerance_) {
      // Recursive residual drifts; confirm with the true one.
      const Vector true_residual = b - matrix_ * x;
      if (backward_error(b, x, true_residual) <= tolerance_) return x;
      r = true_residual;
    }
    z = inverse_diagonal_.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw NotConverged("SpdSolver: CG hit the iteration limit", backward_error(b, x, b - matrix_ * x));
}

Vector solve_spd(const SparseMatrix& A, const Vector& b, double tol) { return SpdSolver(A, tol).solve(b); }

void normalize_signs(Matrix& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index at = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&at);
    if (vectors(at, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

DenseEigResult dense_gen_eig(const Matrix& A, const Matrix& B, double drop_tol) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
    throw ConfigError("dense_gen_eig: matrices must be square and of equal size");
  }
  const Matrix Bs = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> b_eig(Bs);
  if (b_eig.info() != Eigen::Success) throw NumericalError("dense_gen_eig: eigensolver failed on B");
  const Vector& b_values = b_eig.eigenvalues();
  const double b_max = b_values.size() > 0 ? b_values.maxCoeff() : 0.0;
  if (!(b_max > 0.0)) throw DegenerateBasis("dense_gen_eig: B has no positive direction");

  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < b_values.size(); ++i) {
    if (b_values[i] > drop_tol * b_max && b_values[i] > 0.0) kept.push_back(i);
  }
  if (kept.empty()) throw DegenerateBasis("dense_gen_eig: every direction was dropped");

  const auto r = static_cast<Eigen::Index>(kept.size());
  Matrix T(A.rows(), r);
  for (Eigen::Index j = 0; j < r; ++j) {
    T.col(j) = b_eig.eigenvectors().col(kept[j]) / std::sqrt(b_values[kept[j]]);
  }
  Matrix reduced = T.transpose() * (0.5 * (A + A.transpose())) * T;
  reduced = 0.5 * (reduced + reduced.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(reduced);
  if (eig.info() != Eigen::Success) throw NumericalError("dense_gen_eig: reduced eigensolve failed");

  DenseEigResult result;
  result.eigenvalues = eig.eigenvalues();
  result.eigenvectors = T * eig.eigenvectors();
  result.retained_dimension = r;
  normalize_signs(result.eigenvectors);
  return result;
}

std::pair<Matrix, Matrix> project_forms(const Matrix& Z, const SparseMatrix& A, const SparseMatrix& B) {
  if (Z.rows() != A.rows() || Z.rows() != B.rows()) throw ConfigError("project_forms: dimension mismatch");
  const Matrix AZ = A * Z;
  const Matrix BZ = B * Z;
  Matrix a = Z.transpose() * AZ;
  Matrix b = Z.transpose() * BZ;
  a = 0.5 * (a + a.transpose()).eval();
  b = 0.5 * (b + b.transpose()).eval();
  return {std::move(a), std::move(b)};
}

Matrix orthonormalize_a(const Matrix& V, const SparseMatrix& A, double drop_tol) {
  Matrix Q(V.rows(), V.cols());
  Matrix AQ(V.rows(), V.cols());
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    Vector v = V.col(j);
    const double original = std::sqrt(std::max(0.0, v.dot(A * v)));
    if (original == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < kept; ++i) v -= AQ.col(i).dot(v) * Q.col(i);
    }
    const Vector Av = A * v;
    const double remaining = std::sqrt(std::max(0.0, v.dot(Av)));
    if (remaining <= drop_tol * original) continue;
    Q.col(kept) = v / remaining;
    AQ.col(kept) = Av / remaining;
    ++kept;
  }
  return Q.leftCols(kept);
}

namespace {

Matrix random_block(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = dist(rng);
  }
  return M;
}

}  // namespace

SubspaceIterationResult inverse_subspace_iteration(const BlockOperator& apply_a, const BlockOperator& apply_b,
                                                   const BlockOperator& solve_a, const Matrix& start,
                                                   const SubspaceIterationOptions& options) {
  const Eigen::Index n = start.rows();
  const Eigen::Index wanted = options.wanted;
  const Eigen::Index block =
      std::min(n, options.block_size > 0 ? std::max(options.block_size, wanted) : wanted + 10);
  if (wanted < 1 || wanted > n) throw ConfigError("inverse_subspace_iteration: invalid number of wanted pairs");

  std::mt19937_64 rng(0x5eed);
  Matrix X(n, block);
  const Eigen::Index from_start = std::min(block, start.cols());
  X.leftCols(from_start) = start.leftCols(from_start);
  if (from_start < block) X.rightCols(block - from_start) = random_block(n, block - from_start, rng);

  SubspaceIterationResult result;
  double best = std::numeric_limits<double>::infinity();
  int best_iteration = 0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    Matrix Y = solve_a(apply_b(X));
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
      const double norm = Y.col(j).norm();
      if (norm > 0.0) Y.col(j) /= norm;
    }
    const Matrix AY = apply_a(Y);
    const Matrix BY = apply_b(Y);
    Matrix reduced_a = Y.transpose() * AY;
    Matrix reduced_b = Y.transpose() * BY;
    const DenseEigResult ritz = dense_gen_eig(reduced_a, reduced_b, 1e-14);
    if (ritz.retained_dimension < wanted) throw DegenerateBasis("inverse_subspace_iteration: block collapsed");

    const Matrix AX = AY * ritz.eigenvectors;
    const Matrix BX = BY * ritz.eigenvectors;
    X = Y * ritz.eigenvectors;

    double worst = 0.0;
    for (Eigen::Index i = 0; i < wanted; ++i) {
      const double theta = ritz.eigenvalues[i];
      const double scale = AX.col(i).norm() + std::abs(theta) * BX.col(i).norm();
      worst = std::max(worst, (AX.col(i) - theta * BX.col(i)).norm() / scale);
    }
    result.eigenvalues = ritz.eigenvalues.head(wanted);
    result.eigenvectors = X.leftCols(wanted);
    result.iterations = it;
    result.max_residual = worst;

    if (worst <= options.tolerance) break;
    if (worst < 0.5 * best) {
      best = worst;
      best_iteration = it;
    } else if (it - best_iteration >= 10 && best <= options.stagnation_factor * options.tolerance) {
      break;
    }
    if (it == options.max_iterations) {
      if (worst <= options.stagnation_factor * options.tolerance) break;
      throw NotConverged("inverse_subspace_iteration: iteration limit reached", worst);
    }
    if (X.cols() < block) {
      Matrix refill(n, block);
      refill.leftCols(X.cols()) = X;
      refill.rightCols(block - X.cols()) = random_block(n, block - X.cols(), rng);
      X = std::move(refill);
    }
  }
  normalize_signs(result.eigenvectors);
  return result;
}

SubspaceIterationResult smallest_eigenpairs(const SparseMatrix& A, const SparseMatrix& B, Eigen::Index wanted,
                                            double tolerance, const SpdSolver* solver) {
  if (wanted < 1 || wanted > A.rows()) throw ConfigError("smallest_eigenpairs: invalid number of wanted pairs");
  SubspaceIterationResult result;
  if (A.rows() <= kDenseEigenLimit) {
    const DenseEigResult eig = dense_gen_eig(Matrix(A), Matrix(B), 0.0);
    result.eigenvalues = eig.eigenvalues.head(wanted);
    result.eigenvectors = eig.eigenvectors.leftCols(wanted);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < wanted; ++i) {
      const Vector x = result.eigenvectors.col(i);
      const Vector Ax = A * x;
      const Vector Bx = B * x;
      const double theta = result.eigenvalues[i];
      worst = std::max(worst, (Ax - theta * Bx).norm() / (Ax.norm() + std::abs(theta) * Bx.norm()));
    }
    result.max_residual = worst;
    return result;
  }

  std::unique_ptr<SpdSolver> owned;
  if (solver == nullptr) {
    owned = std::make_unique<SpdSolver>(A);
    solver = owned.get();
  }
  SubspaceIterationOptions options;
  options.wanted = wanted;
  options.tolerance = tolerance;
  return inverse_subspace_iteration([&](const Matrix& X) { return Matrix(A * X); },
                                    [&](const Matrix& X) { return Matrix(B * X); },
                                    [&](const Matrix& X) { return solver->solve(X); }, Matrix(A.rows(), 0),
                                    options);
}

}  // namespace augsub
