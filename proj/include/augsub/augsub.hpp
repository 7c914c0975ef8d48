#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "augsub/fem.hpp"
#include "augsub/linalg.hpp"
#include "augsub/oracle.hpp"

namespace augsub {

/// Eigenpair approximations over the fine free DOFs. Eigenvalues ascend and
/// every column satisfies u^T A u = 1.
struct EigenSet {
  Vector eigenvalues;
  Matrix vectors;

  Eigen::Index size() const { return eigenvalues.size(); }
  Vector mu() const { return eigenvalues.cwiseInverse(); }
};

/// Span of the coarse space (through its prolongation) plus extra fine-space
/// columns. A non-owning view.
struct AugmentedBasis {
  const SparseMatrix& prolongation;
  const Matrix& augmentation;
};

enum class RitzMethod { Auto, Dense, Structured };

struct RitzOptions {
  RitzMethod method = RitzMethod::Auto;
  /// Relative threshold on squared norms for discarding directions that are
  /// (numerically) already in the span.
  double drop_tol = 1e-12;
  /// Auto uses the dense path while coarse dimension + extra columns <= this.
  Eigen::Index dense_limit = 400;
  double tolerance = 1e-14;
};

/// Rayleigh-Ritz on V_H + span(W) for a fixed nested pair.
///
/// The dense path projects onto [P | W] and calls dense_gen_eig. The
/// structured path first makes W a-orthogonal to V_H, which turns the
/// projected stiffness into blockdiag(P^T A P, I); the projected pencil is
/// then solved by inverse subspace iteration with a sparse Cholesky
/// factorization of P^T A P, so the coarse block is never densified.
class AugmentedRitz {
 public:
  /// `fine` must outlive this object.
  AugmentedRitz(SparseMatrix prolongation, const AssembledForms& fine, RitzOptions options = {});
  ~AugmentedRitz();
  AugmentedRitz(AugmentedRitz&&) noexcept;

  /// The `count` smallest Ritz pairs, lifted to fine coefficient vectors.
  EigenSet solve(const Matrix& augmentation, Eigen::Index count) const;

  const SparseMatrix& prolongation() const { return prolongation_; }
  const AssembledForms& fine_forms() const { return *fine_; }
  Eigen::Index coarse_dimension() const { return prolongation_.cols(); }
  bool uses_dense(Eigen::Index extra_columns) const;

 private:
  struct Structured;
  EigenSet solve_dense(const Matrix& augmentation, Eigen::Index count) const;
  EigenSet solve_structured(const Matrix& augmentation, Eigen::Index count) const;

  SparseMatrix prolongation_;
  const AssembledForms* fine_;
  RitzOptions options_;
  std::unique_ptr<Structured> structured_;
};

EigenSet augmented_rayleigh_ritz(const AugmentedBasis& basis, const AssembledForms& forms, Eigen::Index k,
                                 const RitzOptions& options = {});

/// First k coarse eigenpairs, prolongated and a-normalized with the fine
/// stiffness matrix.
EigenSet initial_guess(const AssembledForms& coarse_forms, const SparseMatrix& prolongation,
                       const AssembledForms& fine_forms, Eigen::Index k);

/// One pass of steps 2-3 of the k-eigenpair method: u_hat_i solves
/// A u_hat_i = lambda_i B u_i, then Rayleigh-Ritz on V_H + span(u_hat).
EigenSet iterate_step_k(const EigenSet& current, const AugmentedRitz& ritz, const SpdSolver& solver);

struct ComponentChoice {
  Eigen::Index index = 0;
  double component = 0.0;  // |a(u_i, d)| / (|u_i|_a |d|_a)
};

/// Candidate with the largest a-cosine to `direction`; ties go to the lower
/// index.
ComponentChoice select_largest_component(const EigenSet& candidates, const Vector& direction,
                                         const SparseMatrix& A);

/// Fine space, its forms and the stiffness solver, shared by every coarse
/// space paired with it.
struct FineLevel {
  FeSpace space;
  AssembledForms forms;
  SpdSolver solver;
};

std::shared_ptr<const FineLevel> make_fine_level(const FeSpace& space, const CoefficientField& coeffs);

struct NestedProblem {
  std::shared_ptr<const FineLevel> fine;
  FeSpace coarse;
  AssembledForms coarse_forms;
  SparseMatrix prolongation;
};

NestedProblem make_nested_problem(const FeSpace& coarse, std::shared_ptr<const FineLevel> fine,
                                  const CoefficientField& coeffs);

struct IterationRecord {
  int iteration = 0;     // 0: prolongated coarse guess, 1: first Ritz step
  Vector ritz_values;    // ascending; the selected value for the one-pair method
  Vector lambda;         // per tracked index, the Ritz value matched to it
  Vector err_a;          // per tracked index, |u_ref - E u_ref|_a
  Vector err_b;          // same residual in the b-norm
  double update = 0.0;   // max a-norm change of the span (NaN at 0 and 1)
  double seconds = 0.0;
};

struct IterationTrace {
  std::vector<int> tracked;  // 1-based reference indices
  std::vector<IterationRecord> records;
  std::vector<double> rates;  // filled by the experiment layer
  bool converged = false;
};

struct AlgorithmOptions {
  int max_iter = 20;
  double tol = 1e-11;
  RitzOptions ritz;
};

/// Called with every recorded iterate (including iteration 0).
using IterationObserver = std::function<void(int iteration, const EigenSet& current)>;

struct AlgorithmResult {
  EigenSet eigenpairs;
  IterationTrace trace;
};

/// Errors are only recorded when `reference` is given.
AlgorithmResult run_algorithm_k(const NestedProblem& problem, int k, const AlgorithmOptions& options,
                                const ReferenceSolution* reference = nullptr,
                                const IterationObserver& observer = {});
AlgorithmResult run_algorithm_k(const FeSpace& coarse, const FeSpace& fine, const CoefficientField& coeffs, int k,
                                const AlgorithmOptions& options, const ReferenceSolution* reference = nullptr);

/// `target_index` is 1-based. The returned EigenSet holds one pair.
AlgorithmResult run_algorithm_one(const NestedProblem& problem, int target_index, const AlgorithmOptions& options,
                                  const ReferenceSolution* reference = nullptr,
                                  const IterationObserver& observer = {});
AlgorithmResult run_algorithm_one(const FeSpace& coarse, const FeSpace& fine, const CoefficientField& coeffs,
                                  int target_index, const AlgorithmOptions& options,
                                  const ReferenceSolution* reference = nullptr);

/// Greedy assignment of reference vectors to computed vectors by largest
/// |a(u_ref_i, u_j)|. Returns, for each reference column, a computed column.
std::vector<Eigen::Index> match_to_reference(const Matrix& computed, const Matrix& reference, const SparseMatrix& A);

}  // namespace augsub
