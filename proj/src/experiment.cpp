#include "augsub/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "augsub/errors.hpp"

namespace augsub {

namespace {

bool is_power_of_two(int value) { return value > 0 && (value & (value - 1)) == 0; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::string mode_label(CoarseningMode mode) { return mode == CoarseningMode::P ? "p" : "h"; }

void validate(const ExperimentConfig& config) {
  if (config.coarse_n < 1) throw ConfigError("coarse-n must be >= 1");
  if (config.max_iter < 1) throw ConfigError("max-iter must be >= 1");
  if (!(config.tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(config.floor_factor >= 1.0)) throw ConfigError("floor factor must be >= 1");
  if (config.mode == CoarseningMode::P) {
    if (config.fine_degree < 1 || config.fine_degree > 4) throw ConfigError("fine-degree must lie in 1..4");
  } else {
    if (config.fine_n < config.coarse_n || config.fine_n % config.coarse_n != 0 ||
        !is_power_of_two(config.fine_n / config.coarse_n)) {
      throw ConfigError("fine-n must be a power-of-two multiple of coarse-n");
    }
  }
  const long long coarse_dim = static_cast<long long>(config.coarse_n - 1) * (config.coarse_n - 1);
  if (config.algorithm == AlgorithmKind::K) {
    if (config.k < 1 || config.k > coarse_dim) throw ConfigError("k must lie in 1..coarse dimension");
  } else {
    if (config.target < 1 || config.target > coarse_dim) throw ConfigError("target must lie in 1..coarse dimension");
  }
}

std::string fine_description(const ExperimentConfig& config) {
  return config.mode == CoarseningMode::P ? "P" + std::to_string(config.fine_degree)
                                          : "P1-n" + std::to_string(config.fine_n);
}

std::string experiment_name(const ExperimentConfig& config) {
  if (!config.name.empty()) return config.name;
  const std::string algorithm =
      config.algorithm == AlgorithmKind::K ? "k" + std::to_string(config.k) : "one" + std::to_string(config.target);
  return mode_label(config.mode) + "-" + algorithm + "-n" + std::to_string(config.coarse_n);
}

RateFit fit_rate(std::span<const double> errors, double floor_factor) {
  double smallest = std::numeric_limits<double>::infinity();
  for (double e : errors) {
    if (!(e >= 0.0)) throw ConfigError("fit_rate: errors must be non-negative");
    smallest = std::min(smallest, e);
  }
  const double threshold = floor_factor * smallest;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i] > threshold) || !(errors[i] > 0.0)) continue;
    const double x = static_cast<double>(i);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 3) throw ConfigError("fit_rate: fewer than three points above the floor");
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return {std::exp(slope), count, smallest};
}

std::vector<TraceRow> trace_rows(const ExperimentConfig& config, const IterationTrace& trace) {
  std::vector<TraceRow> rows;
  const std::string name = experiment_name(config);
  const std::string mode = mode_label(config.mode);
  const std::string fine = fine_description(config);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& record : trace.records) {
    for (std::size_t t = 0; t < trace.tracked.size(); ++t) {
      const auto i = static_cast<Eigen::Index>(t);
      rows.push_back({name, mode, config.coarse_n, fine, trace.tracked[t], record.iteration, record.lambda[i],
                      record.err_a.size() > i ? record.err_a[i] : nan,
                      record.err_b.size() > i ? record.err_b[i] : nan});
    }
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<TraceRow>& rows, double floor_factor) {
  std::map<std::pair<std::string, int>, std::vector<std::pair<int, double>>> series;
  std::vector<std::pair<std::string, int>> order;
  for (const auto& row : rows) {
    const auto key = std::pair{row.experiment, row.eig_index};
    auto [it, inserted] = series.try_emplace(key);
    if (inserted) order.push_back(key);
    if (row.iter >= kFirstFitIteration) it->second.emplace_back(row.iter, row.err_a);
  }
  std::vector<SummaryRow> summary;
  for (const auto& key : order) {
    auto points = series[key];
    std::sort(points.begin(), points.end());
    std::vector<double> errors;
    for (const auto& [iter, err] : points) errors.push_back(err);
    SummaryRow row{key.first, key.second, std::numeric_limits<double>::quiet_NaN(), 0,
                   std::numeric_limits<double>::quiet_NaN()};
    try {
      const RateFit fit = fit_rate(errors, floor_factor);
      row.rate = fit.rate;
      row.iters_used = fit.points_used;
      row.floor_error = fit.floor_error;
    } catch (const ConfigError&) {
      if (!errors.empty()) row.floor_error = *std::min_element(errors.begin(), errors.end());
    }
    summary.push_back(row);
  }
  return summary;
}

std::string format_real(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.16e", value);
  return buffer;
}

void write_trace_csv(const std::vector<TraceRow>& rows, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.mode << ',' << r.coarse_n << ',' << r.fine_desc << ',' << r.eig_index << ','
        << r.iter << ',' << format_real(r.lambda) << ',' << format_real(r.err_a) << ',' << format_real(r.err_b)
        << '\n';
  }
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path) {
  auto out = open_for_writing(path);
  write_trace_csv(rows, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw ConfigError("trace CSV: missing or unexpected header");
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw ConfigError("trace CSV: expected 9 fields in line '" + line + "'");
    rows.push_back({f[0], f[1], std::stoi(f[2]), f[3], std::stoi(f[4]), std::stoi(f[5]),
                    std::strtod(f[6].c_str(), nullptr), std::strtod(f[7].c_str(), nullptr),
                    std::strtod(f[8].c_str(), nullptr)});
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_trace_csv(in);
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.eig_index << ',' << format_real(r.rate) << ',' << r.iters_used << ','
        << format_real(r.floor_error) << '\n';
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  auto out = open_for_writing(path);
  write_summary_csv(rows, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ProblemCache::Key ProblemCache::key_of(const ExperimentConfig& config) {
  if (config.mode == CoarseningMode::P) return {0, config.coarse_n, config.fine_degree};
  return {1, config.fine_n, 1};
}

namespace {

FeSpace fine_space_for(const ExperimentConfig& config) {
  if (config.mode == CoarseningMode::P) return build_space(build_uniform(config.coarse_n), config.fine_degree);
  // Regular refinement of build_uniform(n) reproduces build_uniform(2n) up to
  // vertex numbering, and DOFs are numbered by coordinate, so the refined
  // space is built directly.
  return build_space(build_uniform(config.fine_n), 1);
}

}  // namespace

std::shared_ptr<const FineLevel> ProblemCache::fine_level(const ExperimentConfig& config) {
  auto& slot = fine_[key_of(config)];
  if (!slot) slot = make_fine_level(fine_space_for(config), CoefficientField::laplace());
  return slot;
}

std::shared_ptr<const ReferenceSolution> ProblemCache::reference(const ExperimentConfig& config,
                                                                 Eigen::Index pairs) {
  auto& slot = reference_[key_of(config)];
  if (!slot || slot->size() < pairs) {
    const auto fine = fine_level(config);
    slot = std::make_shared<const ReferenceSolution>(
        reference_eigensolve(fine->forms, std::max<Eigen::Index>(pairs, 6), 1e-13, &fine->solver));
  }
  return slot;
}

Eigen::Index reference_pair_count(const ExperimentConfig& config) {
  return (config.algorithm == AlgorithmKind::K ? config.k : config.target) + 2;
}

ExperimentResult run_experiment(const ExperimentConfig& config, ProblemCache* cache, const IterationObserver& observer) {
  validate(config);
  ProblemCache local;
  ProblemCache& problems = cache != nullptr ? *cache : local;

  ExperimentResult result;
  result.config = config;
  result.fine = problems.fine_level(config);
  result.reference = problems.reference(config, reference_pair_count(config));

  const FeSpace coarse = build_space(build_uniform(config.coarse_n), 1);
  const NestedProblem problem = make_nested_problem(coarse, result.fine, CoefficientField::laplace());

  AlgorithmOptions options;
  options.max_iter = config.max_iter;
  options.tol = config.tol;
  result.run = config.algorithm == AlgorithmKind::K
                   ? run_algorithm_k(problem, config.k, options, result.reference.get(), observer)
                   : run_algorithm_one(problem, config.target, options, result.reference.get(), observer);

  result.rows = trace_rows(config, result.run.trace);
  result.summary = summarize(result.rows, config.floor_factor);
  // Indices that reach the floor within too few iterates have no rate and
  // do not take part.
  result.worst_rate = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : result.summary) {
    result.run.trace.rates.push_back(row.rate);
    if (!std::isnan(row.rate) && !(row.rate <= result.worst_rate)) result.worst_rate = row.rate;
  }

  if (!config.out_dir.empty()) {
    const std::string name = experiment_name(config);
    result.trace_path = config.out_dir / (name + ".trace.csv");
    result.summary_path = config.out_dir / (name + ".summary.csv");
    write_trace_csv(result.rows, result.trace_path);
    write_summary_csv(result.summary, result.summary_path);
  }
  return result;
}

std::vector<ExperimentFamily> reproduction_families(int max_iter) {
  struct Spec {
    const char* name;
    CoarseningMode mode;
    AlgorithmKind algorithm;
    int count;  // k or target
    std::vector<int> coarse;
    std::vector<double> rates;
  };
  const std::vector<Spec> specs = {
      {"p-k1", CoarseningMode::P, AlgorithmKind::K, 1, {8, 16, 32, 64}, {0.044633, 0.012493, 0.0032218, 0.00081231}},
      {"p-k4", CoarseningMode::P, AlgorithmKind::K, 4, {8, 16, 32, 64}, {0.35452, 0.12177, 0.032864, 0.007999}},
      {"p-one4", CoarseningMode::P, AlgorithmKind::One, 4, {8, 16, 32, 64}, {0.35918, 0.12588, 0.035169, 0.0090917}},
      {"h-k1", CoarseningMode::H, AlgorithmKind::K, 1, {4, 8, 16, 32}, {0.13142, 0.048523, 0.013652, 0.0035056}},
      {"h-k4", CoarseningMode::H, AlgorithmKind::K, 4, {8, 16, 32, 64}, {0.31838, 0.09979, 0.026024, 0.0068251}},
      {"h-one4", CoarseningMode::H, AlgorithmKind::One, 4, {8, 16, 32, 64}, {0.33687, 0.11207, 0.030571, 0.0077354}},
  };
  std::vector<ExperimentFamily> families;
  for (const auto& spec : specs) {
    ExperimentFamily family{spec.name, {}, spec.rates};
    for (int n : spec.coarse) {
      ExperimentConfig config;
      config.mode = spec.mode;
      config.coarse_n = n;
      config.fine_degree = 4;
      config.fine_n = 256;
      config.algorithm = spec.algorithm;
      config.k = spec.algorithm == AlgorithmKind::K ? spec.count : 1;
      config.target = spec.algorithm == AlgorithmKind::One ? spec.count : 1;
      config.max_iter = max_iter;
      family.runs.push_back(config);
    }
    families.push_back(std::move(family));
  }
  return families;
}

}  // namespace augsub
