#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pseudosup/types.hpp"

namespace pseudosup {

struct GridDims {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  Eigen::Index size() const { return height * width; }
  bool operator==(const GridDims&) const = default;
};

/// One example. `label` is what training may read; for unlabeled samples it is
/// empty and the true class, if known, sits in `hidden_label` for diagnostics.
struct Sample {
  std::string id;
  VectorXd features;
  std::optional<int> label;
  std::optional<int> hidden_label;
  std::optional<GridDims> grid;

  bool operator==(const Sample& o) const {
    return id == o.id && label == o.label && hidden_label == o.hidden_label && grid == o.grid &&
           features.size() == o.features.size() && features == o.features;
  }
};

struct DatasetSplits {
  std::vector<Sample> labeled_train;
  std::vector<Sample> unlabeled_train;
  std::vector<Sample> validation;
  std::vector<Sample> test;

  bool operator==(const DatasetSplits&) const = default;
};

struct SplitFractions {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

/// Two unit-covariance Gaussian classes whose means are `class_separation`
/// apart along the first axis (class 0 at -sep/2, class 1 at +sep/2).
/// Samples are interleaved by class; ids are `s<index>`.
std::vector<Sample> generate_overlapping_gaussians(int n_per_class, int dim, double class_separation,
                                                   std::uint64_t seed,
                                                   std::optional<GridDims> grid = std::nullopt);

/// Same grid modality as above plus a 52-value secondary vector per sample,
/// correlated with the informative grid feature, already concatenated via
/// `concat_modalities` with the given target length.
std::vector<Sample> generate_multimodal_gaussians(int n_per_class, GridDims grid, double class_separation,
                                                  Eigen::Index secondary_target_len, std::uint64_t seed);

DatasetSplits split_dataset(const std::vector<Sample>& samples, double label_fraction,
                            SplitFractions fractions, std::uint64_t seed);

/// Every id across all splits, in split order.
std::vector<std::string> all_ids(const DatasetSplits& splits);

struct QcRecord {
  int signal_strength = 10;
  double fixation_loss_rate = 0;
  double false_positive_rate = 0;
  double false_negative_rate = 0;
};

struct QcReport {
  std::size_t total = 0;
  std::size_t retained = 0;
  std::size_t excluded = 0;
  // A sample violating several rules is counted under each of them.
  std::size_t low_signal = 0;
  std::size_t high_fixation_loss = 0;
  std::size_t high_false_positive = 0;
  std::size_t high_false_negative = 0;
};

bool passes_qc(const QcRecord& record);

std::pair<std::vector<Sample>, QcReport> qc_filter(const std::vector<std::pair<Sample, QcRecord>>& records);

inline constexpr Eigen::Index kVisualFieldLocations = 52;
inline constexpr double kTdMin = -38.0;
inline constexpr double kTdMax = 26.0;

struct LongitudinalSeries {
  VectorXd timestamps;  // years
  MatrixXd td_values;   // visits x 52, dB
  VectorXd md_values;   // per visit, dB
};

struct ProgressionLabels {
  bool td_progression = false;
  bool md_fast_progression = false;
  VectorXd location_slopes;
  double md_slope = 0;
};

/// Least-squares slope of `values` against `t`.
double ols_slope(const VectorXd& t, const VectorXd& values);

ProgressionLabels derive_progression_labels(const LongitudinalSeries& series);

/// Appends `secondary` (length 52) up-scaled to `target_len` by nearest-index
/// replication. The grid dims of `grid_sample` are kept and describe the prefix.
Sample concat_modalities(const Sample& grid_sample, const VectorXd& secondary, Eigen::Index target_len);

VectorXd upscale_nearest(const VectorXd& source, Eigen::Index target_len);

}  // namespace pseudosup
