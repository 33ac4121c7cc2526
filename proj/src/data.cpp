#include "pseudosup/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace pseudosup {

namespace {

std::string make_id(std::size_t index) { return "s" + std::to_string(index); }

}  // namespace

std::vector<Sample> generate_overlapping_gaussians(int n_per_class, int dim, double class_separation,
                                                   std::uint64_t seed, std::optional<GridDims> grid) {
  if (n_per_class < 1) throw InvalidInput("n_per_class must be >= 1");
  if (dim < 1) throw InvalidInput("dim must be >= 1");
  if (!(class_separation >= 0) || !std::isfinite(class_separation))
    throw InvalidInput("class_separation must be a finite value >= 0");
  if (grid && grid->size() != dim) throw InvalidInput("grid height*width must equal dim");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(2 * n_per_class));
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const int label = i % 2;
    Sample s;
    s.id = make_id(static_cast<std::size_t>(i));
    s.features.resize(dim);
    for (int j = 0; j < dim; ++j) s.features[j] = noise(rng);
    s.features[0] += (label == 1 ? 0.5 : -0.5) * class_separation;
    s.label = label;
    s.grid = grid;
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<Sample> generate_multimodal_gaussians(int n_per_class, GridDims grid, double class_separation,
                                                  Eigen::Index secondary_target_len, std::uint64_t seed) {
  if (grid.height < 1 || grid.width < 1) throw InvalidInput("grid dims must be positive");
  auto base = generate_overlapping_gaussians(n_per_class, static_cast<int>(grid.size()), class_separation,
                                             seed, grid);
  // Independent stream for the second modality.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Sample> out;
  out.reserve(base.size());
  for (const auto& s : base) {
    VectorXd vf(kVisualFieldLocations);
    for (Eigen::Index k = 0; k < vf.size(); ++k) vf[k] = 0.5 * s.features[0] + noise(rng);
    out.push_back(concat_modalities(s, vf, secondary_target_len));
  }
  return out;
}

DatasetSplits split_dataset(const std::vector<Sample>& samples, double label_fraction, SplitFractions fractions,
                            std::uint64_t seed) {
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) throw InvalidInput("label_fraction must be in (0, 1]");
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0)
    throw InvalidInput("split fractions must be non-negative");
  if (std::abs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9)
    throw InvalidInput("split fractions must sum to 1");
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (!s.label) throw InvalidInput("sample " + s.id + " has no label to split on");
    if (!seen.insert(s.id).second) throw InvalidInput("duplicate sample id " + s.id);
  }

  const auto n = static_cast<long long>(samples.size());
  const long long n_train = std::llround(static_cast<double>(n) * fractions.train);
  const long long n_val = std::llround(static_cast<double>(n) * fractions.validation);
  const long long n_test = n - n_train - n_val;
  const long long n_labeled =
      label_fraction == 1.0 ? n_train : std::llround(static_cast<double>(n_train) * label_fraction);
  if (n_labeled < 1 || n_val < 1 || n_test < 1)
    throw InvalidInput("split leaves an empty labeled, validation or test partition");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplits splits;
  for (long long i = 0; i < n; ++i) {
    const Sample& s = samples[order[static_cast<std::size_t>(i)]];
    if (i < n_labeled) {
      splits.labeled_train.push_back(s);
    } else if (i < n_train) {
      Sample u = s;
      u.hidden_label = u.label;
      u.label.reset();
      splits.unlabeled_train.push_back(std::move(u));
    } else if (i < n_train + n_val) {
      splits.validation.push_back(s);
    } else {
      splits.test.push_back(s);
    }
  }
  return splits;
}

std::vector<std::string> all_ids(const DatasetSplits& splits) {
  std::vector<std::string> ids;
  for (const auto* part : {&splits.labeled_train, &splits.unlabeled_train, &splits.validation, &splits.test})
    for (const auto& s : *part) ids.push_back(s.id);
  return ids;
}

bool passes_qc(const QcRecord& r) {
  return r.signal_strength >= 6 && r.fixation_loss_rate <= 0.33 && r.false_positive_rate <= 0.20 &&
         r.false_negative_rate <= 0.20;
}

std::pair<std::vector<Sample>, QcReport> qc_filter(const std::vector<std::pair<Sample, QcRecord>>& records) {
  std::vector<Sample> kept;
  QcReport report;
  report.total = records.size();
  for (const auto& [sample, qc] : records) {
    if (qc.signal_strength < 6) ++report.low_signal;
    if (qc.fixation_loss_rate > 0.33) ++report.high_fixation_loss;
    if (qc.false_positive_rate > 0.20) ++report.high_false_positive;
    if (qc.false_negative_rate > 0.20) ++report.high_false_negative;
    if (passes_qc(qc)) {
      kept.push_back(sample);
    } else {
      ++report.excluded;
    }
  }
  report.retained = kept.size();
  return {std::move(kept), report};
}

double ols_slope(const VectorXd& t, const VectorXd& values) {
  if (t.size() != values.size()) throw InvalidInput("ols_slope: length mismatch");
  if (t.size() < 2) throw InvalidInput("ols_slope: need at least 2 points");
  const double t_mean = t.mean();
  const double v_mean = values.mean();
  const VectorXd tc = t.array() - t_mean;
  const double denom = tc.squaredNorm();
  if (denom == 0.0) throw InvalidInput("ols_slope: timestamps have zero spread");
  return tc.dot((values.array() - v_mean).matrix()) / denom;
}

ProgressionLabels derive_progression_labels(const LongitudinalSeries& series) {
  const Eigen::Index visits = series.timestamps.size();
  if (visits < 2) throw InvalidInput("progression labels need at least 2 visits");
  if (series.td_values.rows() != visits || series.td_values.cols() != kVisualFieldLocations)
    throw InvalidInput("td_values must be visits x 52");
  if (series.md_values.size() != visits) throw InvalidInput("md_values must have one value per visit");
  for (Eigen::Index i = 1; i < visits; ++i)
    if (!(series.timestamps[i] > series.timestamps[i - 1]))
      throw InvalidInput("timestamps must be strictly increasing");
  if (!series.timestamps.allFinite() || !series.td_values.allFinite() || !series.md_values.allFinite())
    throw InvalidInput("series contains non-finite values");
  if (series.td_values.minCoeff() < kTdMin || series.td_values.maxCoeff() > kTdMax)
    throw InvalidInput("TD values must lie in [-38, 26] dB");

  ProgressionLabels out;
  out.location_slopes.resize(kVisualFieldLocations);
  int declining = 0;
  for (Eigen::Index loc = 0; loc < kVisualFieldLocations; ++loc) {
    out.location_slopes[loc] = ols_slope(series.timestamps, series.td_values.col(loc));
    if (out.location_slopes[loc] <= -1.0) ++declining;
  }
  out.md_slope = ols_slope(series.timestamps, series.md_values);
  out.td_progression = declining >= 3;
  out.md_fast_progression = out.md_slope <= -1.0;
  return out;
}

VectorXd upscale_nearest(const VectorXd& source, Eigen::Index target_len) {
  if (source.size() == 0) throw InvalidInput("cannot up-scale an empty vector");
  if (target_len < source.size()) throw InvalidInput("target length shorter than source");
  VectorXd out(target_len);
  for (Eigen::Index i = 0; i < target_len; ++i) out[i] = source[(i * source.size()) / target_len];
  return out;
}

Sample concat_modalities(const Sample& grid_sample, const VectorXd& secondary, Eigen::Index target_len) {
  if (secondary.size() != kVisualFieldLocations) throw InvalidInput("secondary modality must have 52 values");
  if (target_len < kVisualFieldLocations) throw InvalidInput("target_len must be >= 52");
  Sample out = grid_sample;
  const VectorXd up = upscale_nearest(secondary, target_len);
  out.features.resize(grid_sample.features.size() + target_len);
  out.features << grid_sample.features, up;
  return out;
}

}  // namespace pseudosup
