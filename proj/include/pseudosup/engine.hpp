#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "pseudosup/adamw.hpp"
#include "pseudosup/augment.hpp"
#include "pseudosup/data.hpp"
#include "pseudosup/metrics.hpp"
#include "pseudosup/mlp.hpp"

namespace pseudosup {

using Mlp = MlpModel<double>;
using Adam = AdamWState<double>;

enum class PolicyInit { clone_classifier, random };

struct EngineConfig {
  int beta = 50;       // steps buffered between policy updates
  double gamma = 0.9;  // discount rate
  double policy_lr = 4e-5;
  double classifier_lr = 1e-3;
  double weight_decay = 0.0;
  int epochs = 10;
  int batch_labeled = 32;
  int batch_unlabeled = 32;
  int batch_val = 64;
  int warmup_steps = 100;
  std::uint64_t seed = 1;
  double pseudo_loss_weight = 1.0;
  bool augment = false;
  std::vector<Eigen::Index> hidden_dims{64, 32};
  PolicyInit policy_init = PolicyInit::clone_classifier;
  CropScaleRange crop_scale{};
  int num_classes = 2;

  bool operator==(const EngineConfig&) const = default;
};

void validate(const EngineConfig& cfg);

AdamWConfig<double> classifier_optimizer_config(const EngineConfig& cfg);
AdamWConfig<double> policy_optimizer_config(const EngineConfig& cfg);

/// Independent random streams of one run, all derived from the run seed.
enum class Stream : std::uint64_t { init = 0, labeled = 1, unlabeled = 2, validation = 3, policy = 4, augment = 5 };
std::mt19937_64 make_stream(std::uint64_t seed, Stream stream);

struct Batch {
  MatrixXd features;
  std::vector<int> labels;
};

/// Stacks features (and labels, where present) of the selected samples.
Batch gather_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices);
Batch gather_batch(const std::vector<Sample>& samples);

/// Endless mini-batch stream over `n` items; reshuffles at the start of every pass.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::size_t batch_size, std::mt19937_64 rng);
  std::vector<std::size_t> next();
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

Mlp make_classifier(Eigen::Index input_dim, const EngineConfig& cfg);

/// `cfg.warmup_steps` cross-entropy steps on labeled data only, with a fresh
/// optimizer and the run's labeled stream.
Mlp warmup_supervised(Mlp classifier, const std::vector<Sample>& labeled, const EngineConfig& cfg);

struct PseudoLabels {
  std::vector<int> actions;
  VectorXd log_probs;
};

/// One categorical draw per row from softmax(policy logits).
PseudoLabels sample_pseudo_labels(const Mlp& policy, const MatrixXd& states, std::mt19937_64& rng);

double eval_val_loss(const Mlp& classifier, const Batch& val_batch);
double eval_val_loss(const Mlp& classifier, const std::vector<Sample>& val_batch);

/// max(exp(loss_before - loss_after) - 1, 0)
double compute_reward(double loss_before, double loss_after);

/// Gradient of CE(labeled) + pseudo_weight * CE(pseudo), each term a batch mean.
MlpGradients<double> classifier_gradients(const Mlp& classifier, const Batch& labeled, const MatrixXd& pseudo_states,
                                          std::span<const int> pseudo_labels, double pseudo_weight);

void classifier_step(Mlp& classifier, const Batch& labeled, const MatrixXd& pseudo_states,
                     std::span<const int> pseudo_labels, Adam& optimizer, double pseudo_weight);

/// G_t = sum_{k=0}^{T-1-t} gamma^k rewards[t+k]
double discounted_return(std::span<const double> rewards, double gamma, std::size_t t);
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

struct TrajectoryStep {
  MatrixXd states;
  std::vector<int> actions;
  VectorXd log_probs;
  double reward = 0;
};

/// Bounded buffer of policy steps; holds at most `capacity` (beta) entries.
class Trajectory {
 public:
  explicit Trajectory(std::size_t capacity);
  void push(TrajectoryStep step);
  bool full() const { return steps_.size() == capacity_; }
  bool empty() const { return steps_.empty(); }
  std::size_t size() const { return steps_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<TrajectoryStep>& steps() const { return steps_; }
  std::vector<double> rewards() const;
  void clear() { steps_.clear(); }

 private:
  std::size_t capacity_;
  std::vector<TrajectoryStep> steps_;
};

/// sum_t G_t * mean_i log pi(a_ti | s_ti), evaluated under `policy`.
double policy_surrogate(const Mlp& policy, const Trajectory& trajectory, double gamma);

/// Gradient of `policy_surrogate` with respect to the policy parameters.
MlpGradients<double> policy_surrogate_gradient(const Mlp& policy, const Trajectory& trajectory, double gamma);

/// One optimizer step ascending the surrogate; clears the trajectory.
void policy_update(Mlp& policy, Trajectory& trajectory, Adam& optimizer, double gamma);

struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double loss_val_before = 0;
  double loss_val_after = 0;
  double reward = 0;
  bool policy_update = false;
};

struct EpochRecord {
  int epoch = 0;
  MetricsReport test;
};

struct History {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::int64_t policy_updates = 0;
};

void write_history_csv(std::ostream& os, const History& history);

struct SelfTrainingEpoch {
  int epoch = 0;
  std::size_t selected = 0;
  std::size_t correct = 0;  // against hidden ground truth, where known
  std::size_t with_truth = 0;
};

struct TrainResult {
  Mlp classifier;
  std::optional<Mlp> policy;
  History history;
  MetricsReport test_metrics;
  std::vector<SelfTrainingEpoch> self_training;
};

MetricsReport evaluate(const Mlp& classifier, const std::vector<Sample>& samples);

/// Pseudo-supervisor training: warmup, then per step
/// val loss -> sample pseudo labels -> classifier step -> val loss on the same
/// batch -> reward -> buffer; a policy update every `beta` steps.
TrainResult train(const DatasetSplits& splits, const EngineConfig& cfg);

/// Warmup plus the same step schedule on labeled data only.
TrainResult train_supervised_only(const DatasetSplits& splits, const EngineConfig& cfg);

/// Confidence-threshold pseudo-labeling; the pool of accepted unlabeled
/// samples is rebuilt at the start of every epoch.
TrainResult train_self_training(const DatasetSplits& splits, const EngineConfig& cfg, double confidence_threshold);

}  // namespace pseudosup
