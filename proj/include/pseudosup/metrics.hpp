#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pseudosup/data.hpp"

namespace pseudosup {

struct MetricsReport {
  double accuracy = 0;
  double f1 = 0;
  double auc = 0;
  std::size_t n_samples = 0;
  int positive_class = 1;
};

double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// 2PR/(P+R). Zero when P+R = 0, except that no predicted and no actual
/// positives at all counts as a perfect 1.
double f1_binary(std::span<const int> predictions, std::span<const int> labels, int positive_class = 1);

/// Mann-Whitney U / (n_pos * n_neg) with ties counted as one half.
/// `labels` are 0/1 with 1 the positive class.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

/// Argmax predictions, positive-class probability as the AUC score.
MetricsReport evaluate_scores(const MatrixXd& probabilities, std::span<const int> labels, int positive_class = 1);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);

/// Pearson correlation; empty when either vector has zero variance.
std::optional<double> pearson(const VectorXd& a, const VectorXd& b);

struct Histogram {
  std::vector<double> bin_centers;
  std::vector<std::size_t> counts;
  std::vector<double> density;  // counts / (total * bin_width)
};

Histogram make_histogram(std::span<const double> values, int bins, double lo = -1.0, double hi = 1.0);

struct CorrelationDensity {
  std::vector<double> within_group;
  std::vector<double> between_group;
  Histogram within_hist;
  Histogram between_hist;
  std::size_t skipped_pairs = 0;
};

/// Pearson correlation of every unordered pair of labeled samples, grouped by
/// whether the two labels agree.
CorrelationDensity correlation_density(const std::vector<Sample>& samples, int bins = 50);

void write_density_csv(std::ostream& os, const Histogram& hist);

struct MeanStd {
  double mean = 0;
  double stddev = 0;  // sample (n-1) standard deviation, 0 for n < 2
};

MeanStd mean_and_sample_std(std::span<const double> values);

}  // namespace pseudosup
