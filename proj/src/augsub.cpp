#include "augsub/augsub.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "augsub/errors.hpp"

namespace augsub {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void a_normalize(Matrix& vectors, const SparseMatrix& A) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    const Vector u = vectors.col(j);
    const double norm = std::sqrt(u.dot(A * u));
    if (norm > 0.0) vectors.col(j) /= norm;
  }
}

SparseMatrix symmetrized(const SparseMatrix& M) {
  SparseMatrix transposed = M.transpose();
  return 0.5 * (M + transposed);
}

// Number of coarse eigenvectors kept as the start block of the structured path.
constexpr Eigen::Index kCoarseGuessCount = 20;

}  // namespace

struct AugmentedRitz::Structured {
  SparseMatrix coarse_stiffness;
  SparseMatrix coarse_mass;
  SpdSolver coarse_solver;
  Matrix coarse_guess;

  Structured(const SparseMatrix& P, const AssembledForms& fine)
      : coarse_stiffness(symmetrized(SparseMatrix(P.transpose() * fine.stiffness * P))),
        coarse_mass(symmetrized(SparseMatrix(P.transpose() * fine.mass * P))),
        coarse_solver(coarse_stiffness, 1e-13) {
    const Eigen::Index count = std::min<Eigen::Index>(kCoarseGuessCount, coarse_stiffness.rows());
    coarse_guess = smallest_eigenpairs(coarse_stiffness, coarse_mass, count, 1e-8, &coarse_solver).eigenvectors;
  }
};

AugmentedRitz::AugmentedRitz(SparseMatrix prolongation, const AssembledForms& fine, RitzOptions options)
    : prolongation_(std::move(prolongation)), fine_(&fine), options_(options) {
  if (prolongation_.rows() != fine.stiffness.rows()) {
    throw ConfigError("AugmentedRitz: prolongation rows do not match the fine space");
  }
  if (options_.method != RitzMethod::Dense && prolongation_.cols() > 0 &&
      (options_.method == RitzMethod::Structured || prolongation_.cols() > options_.dense_limit / 2)) {
    structured_ = std::make_unique<Structured>(prolongation_, fine);
  }
}

AugmentedRitz::~AugmentedRitz() = default;
AugmentedRitz::AugmentedRitz(AugmentedRitz&&) noexcept = default;

bool AugmentedRitz::uses_dense(Eigen::Index extra_columns) const {
  if (structured_ == nullptr) return true;
  switch (options_.method) {
    case RitzMethod::Dense: return true;
    case RitzMethod::Structured: return false;
    case RitzMethod::Auto: return coarse_dimension() + extra_columns <= options_.dense_limit;
  }
  return true;
}

EigenSet AugmentedRitz::solve(const Matrix& augmentation, Eigen::Index count) const {
  if (augmentation.rows() != prolongation_.rows()) throw ConfigError("AugmentedRitz: augmentation has wrong size");
  if (count < 1) throw ConfigError("AugmentedRitz: count must be positive");
  return uses_dense(augmentation.cols()) ? solve_dense(augmentation, count) : solve_structured(augmentation, count);
}

EigenSet AugmentedRitz::solve_dense(const Matrix& augmentation, Eigen::Index count) const {
  const Eigen::Index m = prolongation_.cols();
  Matrix Z(prolongation_.rows(), m + augmentation.cols());
  Z.leftCols(m) = Matrix(prolongation_);
  Z.rightCols(augmentation.cols()) = augmentation;
  const auto [a, b] = project_forms(Z, fine_->stiffness, fine_->mass);
  const DenseEigResult eig = dense_gen_eig(a, b, options_.drop_tol);
  if (eig.retained_dimension < count) {
    throw DegenerateBasis("augmented Rayleigh-Ritz: only " + std::to_string(eig.retained_dimension) +
                          " directions retained, " + std::to_string(count) + " requested");
  }
  EigenSet result;
  result.eigenvalues = eig.eigenvalues.head(count);
  result.vectors = Z * eig.eigenvectors.leftCols(count);
  a_normalize(result.vectors, fine_->stiffness);
  normalize_signs(result.vectors);
  return result;
}

EigenSet AugmentedRitz::solve_structured(const Matrix& augmentation, Eigen::Index count) const {
  const SparseMatrix& A = fine_->stiffness;
  const SparseMatrix& B = fine_->mass;
  const SparseMatrix& P = prolongation_;
  const Structured& s = *structured_;
  const Eigen::Index m = P.cols();

  // Make the extra columns a-orthogonal to V_H (two passes).
  Matrix W = augmentation;
  for (int pass = 0; pass < 2; ++pass) {
    const Matrix coarse_rhs = P.transpose() * (A * W);
    W -= P * s.coarse_solver.solve(coarse_rhs);
  }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    const Vector w = W.col(j);
    const Vector original = augmentation.col(j);
    const double before = original.dot(A * original);
    if (before > 0.0 && w.dot(A * w) > options_.drop_tol * before) kept.push_back(j);
  }
  Matrix kept_columns(W.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) kept_columns.col(static_cast<Eigen::Index>(j)) = W.col(kept[j]);
  const Matrix extra = orthonormalize_a(kept_columns, A, std::sqrt(options_.drop_tol));
  const Eigen::Index r = extra.cols();
  if (m + r < count) {
    throw DegenerateBasis("augmented Rayleigh-Ritz: only " + std::to_string(m + r) + " directions retained, " +
                          std::to_string(count) + " requested");
  }

  // Projected pencil: stiffness blockdiag(A_H, I_r), mass [[B_H, C], [C^T, D]].
  const Matrix B_extra = B * extra;
  const Matrix coupling = P.transpose() * B_extra;
  const Matrix extra_mass = extra.transpose() * B_extra;

  auto apply_a = [&](const Matrix& X) {
    Matrix Y(X.rows(), X.cols());
    Y.topRows(m) = s.coarse_stiffness * X.topRows(m);
    Y.bottomRows(r) = X.bottomRows(r);
    return Y;
  };
  auto apply_b = [&](const Matrix& X) {
    Matrix Y(X.rows(), X.cols());
    Y.topRows(m) = s.coarse_mass * X.topRows(m) + coupling * X.bottomRows(r);
    Y.bottomRows(r) = coupling.transpose() * X.topRows(m) + extra_mass * X.bottomRows(r);
    return Y;
  };
  auto solve_a = [&](const Matrix& X) {
    Matrix Y(X.rows(), X.cols());
    Y.topRows(m) = s.coarse_solver.solve(Matrix(X.topRows(m)));
    Y.bottomRows(r) = X.bottomRows(r);
    return Y;
  };

  const Eigen::Index dim = m + r;
  const Eigen::Index block = std::min(dim, std::max(count + 10, r + 8));
  Matrix start = Matrix::Zero(dim, std::min(block, r + s.coarse_guess.cols()));
  for (Eigen::Index j = 0; j < r; ++j) start(m + j, j) = 1.0;
  for (Eigen::Index j = r; j < start.cols(); ++j) start.col(j).head(m) = s.coarse_guess.col(j - r);

  SubspaceIterationOptions options;
  options.wanted = count;
  options.block_size = block;
  options.tolerance = options_.tolerance;
  const SubspaceIterationResult eig = inverse_subspace_iteration(apply_a, apply_b, solve_a, start, options);

  EigenSet result;
  result.eigenvalues = eig.eigenvalues;
  result.vectors = P * eig.eigenvectors.topRows(m) + extra * eig.eigenvectors.bottomRows(r);
  a_normalize(result.vectors, A);
  normalize_signs(result.vectors);
  return result;
}

EigenSet augmented_rayleigh_ritz(const AugmentedBasis& basis, const AssembledForms& forms, Eigen::Index k,
                                 const RitzOptions& options) {
  return AugmentedRitz(basis.prolongation, forms, options).solve(basis.augmentation, k);
}

EigenSet initial_guess(const AssembledForms& coarse_forms, const SparseMatrix& prolongation,
                       const AssembledForms& fine_forms, Eigen::Index k) {
  if (k < 1 || k > coarse_forms.stiffness.rows()) {
    throw ConfigError("initial_guess: k must lie in 1..coarse dimension");
  }
  if (prolongation.cols() != coarse_forms.stiffness.rows() || prolongation.rows() != fine_forms.stiffness.rows()) {
    throw ConfigError("initial_guess: prolongation does not match the forms");
  }
  const SubspaceIterationResult coarse = smallest_eigenpairs(coarse_forms.stiffness, coarse_forms.mass, k);
  EigenSet guess;
  guess.eigenvalues = coarse.eigenvalues;
  guess.vectors = prolongation * coarse.eigenvectors;
  a_normalize(guess.vectors, fine_forms.stiffness);
  normalize_signs(guess.vectors);
  return guess;
}

EigenSet iterate_step_k(const EigenSet& current, const AugmentedRitz& ritz, const SpdSolver& solver) {
  const AssembledForms& forms = ritz.fine_forms();
  Matrix rhs = forms.mass * current.vectors;
  for (Eigen::Index i = 0; i < current.size(); ++i) rhs.col(i) *= current.eigenvalues[i];
  const Matrix corrections = solver.solve(rhs);
  return ritz.solve(corrections, current.size());
}

ComponentChoice select_largest_component(const EigenSet& candidates, const Vector& direction,
                                         const SparseMatrix& A) {
  if (candidates.size() == 0) throw ConfigError("select_largest_component: no candidates");
  const Vector Ad = A * direction;
  const double direction_norm = std::sqrt(direction.dot(Ad));
  if (!(direction_norm > 0.0)) throw ConfigError("select_largest_component: zero direction");
  ComponentChoice best;
  best.component = -1.0;
  for (Eigen::Index i = 0; i < candidates.size(); ++i) {
    const Vector u = candidates.vectors.col(i);
    const double u_norm = std::sqrt(u.dot(A * u));
    const double component = std::abs(u.dot(Ad)) / (u_norm * direction_norm);
    if (component > best.component) best = {i, component};
  }
  return best;
}

std::shared_ptr<const FineLevel> make_fine_level(const FeSpace& space, const CoefficientField& coeffs) {
  AssembledForms forms = assemble_forms(space, coeffs);
  SpdSolver solver(forms.stiffness);
  return std::make_shared<const FineLevel>(FineLevel{space, std::move(forms), std::move(solver)});
}

NestedProblem make_nested_problem(const FeSpace& coarse, std::shared_ptr<const FineLevel> fine,
                                  const CoefficientField& coeffs) {
  NestedProblem problem;
  problem.prolongation = prolongation(coarse, fine->space);
  problem.coarse = coarse;
  problem.coarse_forms = assemble_forms(coarse, coeffs);
  problem.fine = std::move(fine);
  return problem;
}

std::vector<Eigen::Index> match_to_reference(const Matrix& computed, const Matrix& reference, const SparseMatrix& A) {
  const Matrix overlap = (reference.transpose() * (A * computed)).cwiseAbs();
  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(reference.cols()), -1);
  std::vector<bool> used(static_cast<std::size_t>(computed.cols()), false);
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < overlap.rows(); ++i) {
    for (Eigen::Index j = 0; j < overlap.cols(); ++j) pairs.emplace_back(overlap(i, j), i, j);
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });
  for (const auto& [value, i, j] : pairs) {
    if (assignment[static_cast<std::size_t>(i)] >= 0 || used[static_cast<std::size_t>(j)]) continue;
    assignment[static_cast<std::size_t>(i)] = j;
    used[static_cast<std::size_t>(j)] = true;
  }
  return assignment;
}

namespace {

class Recorder {
 public:
  Recorder(IterationTrace& trace, const ReferenceSolution* reference, const AssembledForms& forms,
           const IterationObserver& observer)
      : trace_(trace), reference_(reference), forms_(forms), observer_(observer) {
    if (reference_ != nullptr) {
      for (int index : trace_.tracked) {
        if (index > reference_->size()) throw ConfigError("reference solution has too few eigenpairs");
      }
    }
  }

  void record(int iteration, const EigenSet& current, const Vector& ritz_values, double update,
              std::chrono::steady_clock::time_point started) {
    IterationRecord rec;
    rec.iteration = iteration;
    rec.ritz_values = ritz_values;
    rec.update = update;
    const auto tracked = static_cast<Eigen::Index>(trace_.tracked.size());
    rec.lambda.resize(tracked);
    if (reference_ != nullptr) {
      Matrix targets(forms_.stiffness.rows(), tracked);
      for (Eigen::Index t = 0; t < tracked; ++t) targets.col(t) = reference_->eigenvectors.col(trace_.tracked[t] - 1);
      const auto match = match_to_reference(current.vectors, targets, forms_.stiffness);
      rec.err_a.resize(tracked);
      rec.err_b.resize(tracked);
      for (Eigen::Index t = 0; t < tracked; ++t) {
        const ProjectionError err = projection_errors(targets.col(t), current.vectors, forms_.stiffness, forms_.mass);
        rec.err_a[t] = err.a;
        rec.err_b[t] = err.b;
        rec.lambda[t] = current.eigenvalues[match[static_cast<std::size_t>(t)]];
      }
    } else {
      for (Eigen::Index t = 0; t < tracked; ++t) {
        rec.lambda[t] = current.eigenvalues[std::min<Eigen::Index>(t, current.size() - 1)];
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    trace_.records.push_back(std::move(rec));
    if (observer_) observer_(iteration, current);
  }

 private:
  IterationTrace& trace_;
  const ReferenceSolution* reference_;
  const AssembledForms& forms_;
  const IterationObserver& observer_;
};

double span_update(const EigenSet& next, const EigenSet& previous, const SparseMatrix& A) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < next.size(); ++i) {
    worst = std::max(worst, projection_error_a(next.vectors.col(i), previous.vectors, A));
  }
  return worst;
}

void check_options(const AlgorithmOptions& options) {
  if (options.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(options.tol > 0.0)) throw ConfigError("tol must be positive");
}

}  // namespace

AlgorithmResult run_algorithm_k(const NestedProblem& problem, int k, const AlgorithmOptions& options,
                                const ReferenceSolution* reference, const IterationObserver& observer) {
  check_options(options);
  if (k < 1 || k > problem.prolongation.cols()) throw ConfigError("run_algorithm_k: k must lie in 1..coarse dimension");
  const AssembledForms& forms = problem.fine->forms;
  const SparseMatrix& A = forms.stiffness;

  AlgorithmResult result;
  IterationTrace& trace = result.trace;
  for (int i = 1; i <= k; ++i) trace.tracked.push_back(i);
  Recorder recorder(trace, reference, forms, observer);

  auto started = std::chrono::steady_clock::now();
  const AugmentedRitz ritz(problem.prolongation, forms, options.ritz);
  EigenSet current = initial_guess(problem.coarse_forms, problem.prolongation, forms, k);
  recorder.record(0, current, current.eigenvalues, kNaN, started);

  // Step 1: Ritz on V_H + span(u^(1)).
  started = std::chrono::steady_clock::now();
  current = ritz.solve(current.vectors, k);
  recorder.record(1, current, current.eigenvalues, kNaN, started);

  for (int iteration = 2; iteration <= options.max_iter; ++iteration) {
    started = std::chrono::steady_clock::now();
    EigenSet next = iterate_step_k(current, ritz, problem.fine->solver);
    const double update = span_update(next, current, A);
    current = std::move(next);
    recorder.record(iteration, current, current.eigenvalues, update, started);
    if (update < options.tol) {
      trace.converged = true;
      break;
    }
  }
  result.eigenpairs = std::move(current);
  return result;
}

AlgorithmResult run_algorithm_k(const FeSpace& coarse, const FeSpace& fine, const CoefficientField& coeffs, int k,
                                const AlgorithmOptions& options, const ReferenceSolution* reference) {
  const NestedProblem problem = make_nested_problem(coarse, make_fine_level(fine, coeffs), coeffs);
  return run_algorithm_k(problem, k, options, reference);
}

AlgorithmResult run_algorithm_one(const NestedProblem& problem, int target_index, const AlgorithmOptions& options,
                                  const ReferenceSolution* reference, const IterationObserver& observer) {
  check_options(options);
  const Eigen::Index m = problem.prolongation.cols();
  if (target_index < 1 || target_index > m) {
    throw ConfigError("run_algorithm_one: target index must lie in 1..coarse dimension");
  }
  const AssembledForms& forms = problem.fine->forms;
  const SparseMatrix& A = forms.stiffness;
  const SparseMatrix& B = forms.mass;
  // Candidates for the largest-component choice: the lowest few Ritz pairs.
  const Eigen::Index candidates = std::min<Eigen::Index>(target_index + 8, m);

  AlgorithmResult result;
  IterationTrace& trace = result.trace;
  trace.tracked.push_back(target_index);
  Recorder recorder(trace, reference, forms, observer);

  auto pick = [&](const EigenSet& ritz_pairs, const Vector& direction) {
    const ComponentChoice choice = select_largest_component(ritz_pairs, direction, A);
    EigenSet picked;
    picked.eigenvalues = ritz_pairs.eigenvalues.segment(choice.index, 1);
    picked.vectors = ritz_pairs.vectors.col(choice.index);
    return picked;
  };

  auto started = std::chrono::steady_clock::now();
  const AugmentedRitz ritz(problem.prolongation, forms, options.ritz);
  const EigenSet coarse_pairs = initial_guess(problem.coarse_forms, problem.prolongation, forms, target_index);
  EigenSet current;
  current.eigenvalues = coarse_pairs.eigenvalues.tail(1);
  current.vectors = coarse_pairs.vectors.rightCols(1);
  recorder.record(0, current, current.eigenvalues, kNaN, started);

  started = std::chrono::steady_clock::now();
  current = pick(ritz.solve(current.vectors, candidates), current.vectors.col(0));
  recorder.record(1, current, current.eigenvalues, kNaN, started);

  for (int iteration = 2; iteration <= options.max_iter; ++iteration) {
    started = std::chrono::steady_clock::now();
    const Vector rhs = current.eigenvalues[0] * (B * current.vectors.col(0));
    const Vector correction = problem.fine->solver.solve(rhs);
    EigenSet next = pick(ritz.solve(Matrix(correction), candidates), correction);
    const double update = span_update(next, current, A);
    current = std::move(next);
    recorder.record(iteration, current, current.eigenvalues, update, started);
    if (update < options.tol) {
      trace.converged = true;
      break;
    }
  }
  result.eigenpairs = std::move(current);
  return result;
}

AlgorithmResult run_algorithm_one(const FeSpace& coarse, const FeSpace& fine, const CoefficientField& coeffs,
                                  int target_index, const AlgorithmOptions& options,
                                  const ReferenceSolution* reference) {
  const NestedProblem problem = make_nested_problem(coarse, make_fine_level(fine, coeffs), coeffs);
  return run_algorithm_one(problem, target_index, options, reference);
}

}  // namespace augsub
