#include "pseudosup/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "pseudosup/checkpoint.hpp"

namespace pseudosup {

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) throw InvalidInput("predictions and labels differ in length");
  if (a == 0) throw InvalidInput("metrics of an empty set");
}

}  // namespace

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_pair(predictions.size(), labels.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double f1_binary(std::span<const int> predictions, std::span<const int> labels, int positive_class) {
  check_pair(predictions.size(), labels.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == positive_class;
    const bool y = labels[i] == positive_class;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
  }
  if (tp + fp == 0 && tp + fn == 0) return 1.0;
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_pair(scores.size(), labels.size());
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InvalidInput("auc_roc expects 0/1 labels");
    n_pos += y == 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidInput("AUC undefined with a single class");
  for (double s : scores)
    if (std::isnan(s)) throw InvalidInput("auc_roc: NaN score");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled to stay integral.
  std::size_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::size_t doubled_rank = i + 1 + j;  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) doubled_rank_sum += doubled_rank;
    i = j;
  }
  const double u = 0.5 * static_cast<double>(doubled_rank_sum) - 0.5 * static_cast<double>(n_pos * (n_pos + 1));
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport evaluate_scores(const MatrixXd& probabilities, std::span<const int> labels, int positive_class) {
  if (probabilities.rows() != static_cast<Eigen::Index>(labels.size()))
    throw InvalidInput("probabilities and labels differ in length");
  if (positive_class < 0 || positive_class >= probabilities.cols()) throw InvalidInput("bad positive class");
  std::vector<int> predictions(labels.size());
  std::vector<double> scores(labels.size());
  std::vector<int> binary(labels.size());
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    Eigen::Index arg = 0;
    probabilities.row(i).maxCoeff(&arg);
    predictions[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    scores[static_cast<std::size_t>(i)] = probabilities(i, positive_class);
    binary[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == positive_class ? 1 : 0;
  }
  MetricsReport r;
  r.accuracy = accuracy(predictions, labels);
  r.f1 = f1_binary(predictions, labels, positive_class);
  r.auc = auc_roc(scores, binary);
  r.n_samples = labels.size();
  r.positive_class = positive_class;
  return r;
}

std::string metrics_csv_header() { return "accuracy,f1,auc,n_samples,positive_class"; }

std::string metrics_csv_row(const MetricsReport& r) {
  return format_real(r.accuracy) + "," + format_real(r.f1) + "," + format_real(r.auc) + "," +
         std::to_string(r.n_samples) + "," + std::to_string(r.positive_class);
}

std::optional<double> pearson(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidInput("pearson needs equal-length vectors of size >= 2");
  const VectorXd ac = a.array() - a.mean();
  const VectorXd bc = b.array() - b.mean();
  const double saa = ac.squaredNorm();
  const double sbb = bc.squaredNorm();
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(ac.dot(bc) / std::sqrt(saa * sbb), -1.0, 1.0);
}

Histogram make_histogram(std::span<const double> values, int bins, double lo, double hi) {
  if (bins < 1 || !(hi > lo)) throw InvalidInput("invalid histogram binning");
  Histogram h;
  const double width = (hi - lo) / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (int b = 0; b < bins; ++b) h.bin_centers.push_back(lo + (b + 0.5) * width);
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<int>((v - lo) / width);
    b = std::min(b, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  const auto total = std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0});
  for (auto c : h.counts)
    h.density.push_back(total == 0 ? 0.0 : static_cast<double>(c) / (static_cast<double>(total) * width));
  return h;
}

CorrelationDensity correlation_density(const std::vector<Sample>& samples, int bins) {
  std::map<int, int> per_class;
  for (const auto& s : samples) {
    if (!s.label) throw InvalidInput("correlation_density needs labeled samples");
    ++per_class[*s.label];
  }
  if (per_class.empty()) throw InvalidInput("correlation_density of no samples");
  for (const auto& [label, count] : per_class)
    if (count < 2) throw InvalidInput("correlation_density needs >= 2 samples per class");

  CorrelationDensity out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const auto r = pearson(samples[i].features, samples[j].features);
      if (!r) {
        ++out.skipped_pairs;
        continue;
      }
      (*samples[i].label == *samples[j].label ? out.within_group : out.between_group).push_back(*r);
    }
  }
  out.within_hist = make_histogram(out.within_group, bins);
  out.between_hist = make_histogram(out.between_group, bins);
  return out;
}

void write_density_csv(std::ostream& os, const Histogram& hist) {
  os << "bin_center,density\n";
  for (std::size_t b = 0; b < hist.bin_centers.size(); ++b)
    os << format_real(hist.bin_centers[b]) << ',' << format_real(hist.density[b]) << '\n';
}

MeanStd mean_and_sample_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

}  // namespace pseudosup
