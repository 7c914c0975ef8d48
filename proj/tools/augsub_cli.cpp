// Command-line front end: single experiments, the full convergence study,
// and debugging dumps of meshes and assembled matrices.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "augsub/errors.hpp"
#include "augsub/experiment.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

void print_summary(const augsub::ExperimentResult& result) {
  for (const auto& row : result.summary) {
    std::printf("%-16s index %d  rate %.6g  (points %d, floor %.3g)\n", row.experiment.c_str(), row.eig_index,
                row.rate, row.iters_used, row.floor_error);
  }
}

int run_single(const augsub::ExperimentConfig& config) {
  const auto result = augsub::run_experiment(config);
  print_summary(result);
  const auto& last = result.run.trace.records.back();
  std::printf("iterations %d, converged %s, final lambda %.15g\n", last.iteration,
              result.run.trace.converged ? "yes" : "no", last.lambda[0]);
  if (!result.trace_path.empty()) std::printf("wrote %s\n", result.trace_path.string().c_str());
  return 0;
}

int run_reproduction(const std::filesystem::path& out_dir, int max_iter) {
  augsub::ProblemCache cache;
  std::vector<augsub::SummaryRow> all;
  std::printf("%-8s %6s %14s %14s %8s\n", "family", "H", "rate", "reported", "ratio");
  for (const auto& family : augsub::reproduction_families(max_iter)) {
    for (std::size_t i = 0; i < family.runs.size(); ++i) {
      auto config = family.runs[i];
      config.out_dir = out_dir;
      const auto result = augsub::run_experiment(config, &cache);
      all.insert(all.end(), result.summary.begin(), result.summary.end());
      std::printf("%-8s %6s %14.6g %14.6g %8.3f\n", family.name.c_str(),
                  ("1/" + std::to_string(config.coarse_n)).c_str(), result.worst_rate, family.expected_rates[i],
                  result.worst_rate / family.expected_rates[i]);
      std::fflush(stdout);
    }
  }
  augsub::write_summary_csv(all, out_dir / "summary.csv");
  std::printf("wrote %s\n", (out_dir / "summary.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Augmented subspace eigensolver experiments"};
  app.require_subcommand(1);

  augsub::ExperimentConfig config;
  std::string mode = "p";
  std::string algorithm = "k";
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run one experiment and write trace/summary CSVs");
  run->add_option("--mode", mode, "Coarsening: p (P1 in P_D, same mesh) or h (P1 two-grid)")
      ->check(CLI::IsMember({"p", "h"}));
  run->add_option("--coarse-n", config.coarse_n, "Coarse mesh squares per side")->capture_default_str();
  run->add_option("--fine-degree", config.fine_degree, "Fine degree in p-mode")->capture_default_str();
  run->add_option("--fine-n", config.fine_n, "Fine squares per side in h-mode")->capture_default_str();
  run->add_option("--algorithm", algorithm, "k (first k pairs) or one (single pair)")
      ->check(CLI::IsMember({"k", "one"}));
  run->add_option("--k", config.k, "Number of eigenpairs")->capture_default_str();
  run->add_option("--target", config.target, "1-based eigenpair index for --algorithm one")->capture_default_str();
  run->add_option("--max-iter", config.max_iter, "Iteration cap")->capture_default_str();
  run->add_option("--tol", config.tol, "Stop when the a-norm span update falls below this")->capture_default_str();
  run->add_option("--floor-factor", config.floor_factor, "Rate fit ignores errors below this multiple of the smallest")
      ->capture_default_str();
  run->add_option("--name", config.name, "Experiment name used in CSVs and file names");
  run->add_option("--out", out_dir, "Output directory");

  std::string repro_out = "results";
  int repro_max_iter = 40;
  auto* repro = app.add_subcommand("repro-paper", "Run all six published convergence studies");
  repro->add_option("--out", repro_out, "Output directory")->capture_default_str();
  repro->add_option("--max-iter", repro_max_iter, "Iteration cap per run")->capture_default_str();

  int mesh_n = 2;
  int mesh_refine = 0;
  std::string mesh_out;
  auto* mesh = app.add_subcommand("mesh", "Write a uniform (optionally refined) mesh");
  mesh->add_option("--n", mesh_n, "Squares per side")->capture_default_str();
  mesh->add_option("--refine", mesh_refine, "Regular refinements")->capture_default_str();
  mesh->add_option("--out", mesh_out, "Output file (stdout when omitted)");

  int forms_n = 2;
  int forms_degree = 1;
  std::string forms_out = ".";
  auto* forms = app.add_subcommand("export-forms", "Write stiffness and mass matrices in Matrix Market format");
  forms->add_option("--n", forms_n, "Squares per side")->capture_default_str();
  forms->add_option("--degree", forms_degree, "Lagrange degree")->capture_default_str();
  forms->add_option("--out", forms_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      config.mode = mode == "p" ? augsub::CoarseningMode::P : augsub::CoarseningMode::H;
      config.algorithm = algorithm == "k" ? augsub::AlgorithmKind::K : augsub::AlgorithmKind::One;
      config.out_dir = out_dir;
      return run_single(config);
    }
    if (*repro) return run_reproduction(repro_out, repro_max_iter);
    if (*mesh) {
      if (mesh_refine < 0) throw augsub::ConfigError("--refine must be >= 0");
      auto m = augsub::build_uniform(mesh_n);
      for (int r = 0; r < mesh_refine; ++r) m = augsub::refine_regular(m);
      if (mesh_out.empty()) {
        augsub::write_mesh(m, std::cout);
      } else {
        std::ofstream out(mesh_out, std::ios::binary);
        augsub::write_mesh(m, out);
      }
      return 0;
    }
    if (*forms) {
      const auto space = augsub::build_space(augsub::build_uniform(forms_n), forms_degree);
      const auto assembled = augsub::assemble_forms(space, augsub::CoefficientField::laplace());
      std::filesystem::create_directories(forms_out);
      std::ofstream a(std::filesystem::path(forms_out) / "stiffness.mtx", std::ios::binary);
      augsub::write_matrix_market(assembled.stiffness, a);
      std::ofstream b(std::filesystem::path(forms_out) / "mass.mtx", std::ios::binary);
      augsub::write_matrix_market(assembled.mass, b);
      return 0;
    }
  } catch (const augsub::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const augsub::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
