#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pseudosup/config.hpp"
#include "pseudosup/engine.hpp"

namespace pseudosup {

/// Splits for one seed: the data file as-is, or synthetic data generated and
/// split with that seed. Every method sees the same splits for a seed.
DatasetSplits build_splits(const ExperimentConfig& cfg, std::uint64_t seed);

EngineConfig engine_for(const ExperimentConfig& cfg, std::uint64_t seed);

TrainResult run_method(Method method, const DatasetSplits& splits, const ExperimentConfig& cfg, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::uint64_t split_hash = 0;
  MetricsReport metrics;
};

struct MethodSummary {
  Method method = Method::supervised;
  std::vector<SeedOutcome> runs;
  MeanStd accuracy;
  MeanStd f1;
  MeanStd auc;
};

MethodSummary summarize(Method method, std::vector<SeedOutcome> runs);

std::string summary_csv_header();
std::string summary_csv_row(const MethodSummary& s);

/// Runs `cfg.method` for every seed. Writes
///   <out>/<method>/<seed>/{history.csv, metrics.csv, classifier.ckpt[, policy.ckpt]}
///   <out>/summary.csv and <out>/config.echo
MethodSummary run_experiment(const ExperimentConfig& cfg);

struct AblationRow {
  int beta = 0;
  double gamma = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct AblationCell {
  int beta = 0;
  double gamma = 0;
  MeanStd auc;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<AblationCell> cells;  // beta-major, gamma-minor
};

inline constexpr int kDefaultBeta = 50;
inline constexpr double kDefaultGamma = 0.9;

/// Pseudo-supervisor runs over beta_grid x gamma_grid x seeds. Writes
/// ablation.csv (long form), ablation_mean.csv and ablation_pivot.csv.
AblationResult run_ablation(const ExperimentConfig& cfg);

/// Every method in `cfg.compare_methods` on shared per-seed splits. Writes
/// comparison.csv, comparison_splits.csv and per-cell directories.
std::vector<MethodSummary> compare_methods(const ExperimentConfig& cfg);

/// Reads a file written by one of the functions above.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pseudosup
