#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "augsub/augsub.hpp"

namespace augsub {

enum class CoarseningMode { P, H };
enum class AlgorithmKind { K, One };

/// p-mode: P1 coarse and P_{fine_degree} fine on one uniform mesh.
/// h-mode: P1 on both, the fine mesh refined from coarse_n up to fine_n.
struct ExperimentConfig {
  std::string name;  // empty: derived from the other fields
  CoarseningMode mode = CoarseningMode::P;
  int coarse_n = 8;
  int fine_degree = 4;
  int fine_n = 256;
  AlgorithmKind algorithm = AlgorithmKind::K;
  int k = 1;
  int target = 1;
  int max_iter = 20;
  double tol = 1e-11;
  double floor_factor = 1e3;
  std::filesystem::path out_dir;  // empty: no files written
};

/// Throws ConfigError.
void validate(const ExperimentConfig& config);
std::string experiment_name(const ExperimentConfig& config);
std::string fine_description(const ExperimentConfig& config);
std::string mode_label(CoarseningMode mode);

struct RateFit {
  double rate = 0.0;
  int points_used = 0;
  double floor_error = 0.0;
};

/// exp of the least-squares slope of ln(error) against position, using only
/// the entries above floor_factor * min(errors). Needs three such entries.
RateFit fit_rate(std::span<const double> errors, double floor_factor = 1e3);

struct TraceRow {
  std::string experiment;
  std::string mode;
  int coarse_n = 0;
  std::string fine_desc;
  int eig_index = 0;
  int iter = 0;
  double lambda = 0.0;
  double err_a = 0.0;
  double err_b = 0.0;
};

struct SummaryRow {
  std::string experiment;
  int eig_index = 0;
  double rate = 0.0;
  int iters_used = 0;
  double floor_error = 0.0;
};

std::vector<TraceRow> trace_rows(const ExperimentConfig& config, const IterationTrace& trace);

/// Iterations 0 and 1 are both the coarse-space solution. The first
/// augmented step out of it contracts far more than later ones, so rates
/// are fitted from the first augmented iterate on.
inline constexpr int kFirstFitIteration = 2;

/// Rates per eig_index from trace rows alone, using iterations
/// >= kFirstFitIteration. An index that cannot be fitted gets rate NaN.
std::vector<SummaryRow> summarize(const std::vector<TraceRow>& rows, double floor_factor = 1e3);

inline constexpr const char* kTraceHeader = "experiment,mode,coarse_n,fine_desc,eig_index,iter,lambda,err_a,err_b";
inline constexpr const char* kSummaryHeader = "experiment,eig_index,rate,iters_used,floor_error";

/// Scientific notation, 17 significant digits.
std::string format_real(double value);

void write_trace_csv(const std::vector<TraceRow>& rows, std::ostream& out);
void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path);
std::vector<TraceRow> read_trace_csv(std::istream& in);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

/// Shares fine levels and reference solutions between experiments that use
/// the same fine space.
class ProblemCache {
 public:
  std::shared_ptr<const FineLevel> fine_level(const ExperimentConfig& config);
  std::shared_ptr<const ReferenceSolution> reference(const ExperimentConfig& config, Eigen::Index pairs);

 private:
  using Key = std::tuple<int, int, int>;  // mode, fine_n, degree
  static Key key_of(const ExperimentConfig& config);
  std::map<Key, std::shared_ptr<const FineLevel>> fine_;
  std::map<Key, std::shared_ptr<const ReferenceSolution>> reference_;
};

struct ExperimentResult {
  ExperimentConfig config;
  AlgorithmResult run;
  std::shared_ptr<const ReferenceSolution> reference;
  std::shared_ptr<const FineLevel> fine;
  std::vector<TraceRow> rows;
  std::vector<SummaryRow> summary;
  double worst_rate = 0.0;  // max over fitted indices; NaN if none
  std::filesystem::path trace_path;
  std::filesystem::path summary_path;
};

/// Number of reference pairs computed for a configuration (tracked indices
/// plus two, so the first unwanted eigenvalue is available).
Eigen::Index reference_pair_count(const ExperimentConfig& config);

ExperimentResult run_experiment(const ExperimentConfig& config, ProblemCache* cache = nullptr,
                                const IterationObserver& observer = {});

/// One published convergence study: four coarse sizes with their reported
/// contraction rates.
struct ExperimentFamily {
  std::string name;
  std::vector<ExperimentConfig> runs;
  std::vector<double> expected_rates;
};

std::vector<ExperimentFamily> reproduction_families(int max_iter = 40);

}  // namespace augsub
