#include "pseudosup/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pseudosup/checkpoint.hpp"

namespace pseudosup {

void validate(const EngineConfig& cfg) {
  if (cfg.beta < 1) throw InvalidInput("beta must be >= 1");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw InvalidInput("gamma must be in [0, 1]");
  if (!(cfg.policy_lr > 0.0) || !std::isfinite(cfg.policy_lr)) throw InvalidInput("policy_lr must be > 0");
  if (!(cfg.classifier_lr > 0.0) || !std::isfinite(cfg.classifier_lr))
    throw InvalidInput("classifier_lr must be > 0");
  if (!(cfg.weight_decay >= 0.0)) throw InvalidInput("weight_decay must be >= 0");
  if (cfg.epochs < 0) throw InvalidInput("epochs must be >= 0");
  if (cfg.warmup_steps < 0) throw InvalidInput("warmup_steps must be >= 0");
  if (cfg.batch_labeled < 1 || cfg.batch_unlabeled < 1 || cfg.batch_val < 1)
    throw InvalidInput("batch sizes must be >= 1");
  if (!(cfg.pseudo_loss_weight >= 0.0) || !std::isfinite(cfg.pseudo_loss_weight))
    throw InvalidInput("pseudo_loss_weight must be >= 0");
  if (cfg.num_classes < 2) throw InvalidInput("num_classes must be >= 2");
  for (auto h : cfg.hidden_dims)
    if (h < 1) throw InvalidInput("hidden dims must be positive");
}

AdamWConfig<double> classifier_optimizer_config(const EngineConfig& cfg) {
  AdamWConfig<double> c;
  c.learning_rate = cfg.classifier_lr;
  c.weight_decay = cfg.weight_decay;
  return c;
}

AdamWConfig<double> policy_optimizer_config(const EngineConfig& cfg) {
  AdamWConfig<double> c;
  c.learning_rate = cfg.policy_lr;
  c.weight_decay = cfg.weight_decay;
  return c;
}

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  return std::mt19937_64(seq);
}

Batch gather_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices) {
  Batch b;
  if (indices.empty()) return b;
  const Eigen::Index dim = samples[indices.front()].features.size();
  b.features.resize(static_cast<Eigen::Index>(indices.size()), dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Sample& s = samples.at(indices[r]);
    if (s.features.size() != dim) throw InvalidInput("samples differ in feature length");
    b.features.row(static_cast<Eigen::Index>(r)) = s.features.transpose();
    if (s.label) b.labels.push_back(*s.label);
  }
  if (!b.labels.empty() && b.labels.size() != indices.size()) throw InvalidInput("batch mixes labeled and unlabeled samples");
  return b;
}

Batch gather_batch(const std::vector<Sample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return gather_batch(samples, idx);
}

BatchCycler::BatchCycler(std::size_t n, std::size_t batch_size, std::mt19937_64 rng)
    : order_(n), batch_size_(batch_size), rng_(std::move(rng)) {
  if (batch_size_ == 0) throw InvalidInput("batch size must be >= 1");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  cursor_ = order_.size();
}

std::vector<std::size_t> BatchCycler::next() {
  if (order_.empty()) return {};
  if (cursor_ >= order_.size()) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return out;
}

Mlp make_classifier(Eigen::Index input_dim, const EngineConfig& cfg) {
  std::vector<Eigen::Index> dims{input_dim};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.num_classes);
  auto rng = make_stream(cfg.seed, Stream::init);
  return make_mlp<double>(dims, rng);
}

PseudoLabels sample_pseudo_labels(const Mlp& policy, const MatrixXd& states, std::mt19937_64& rng) {
  if (states.rows() == 0) throw InvalidInput("cannot sample pseudo labels for an empty batch");
  const MatrixXd log_probs = log_softmax_rows(mlp_logits(policy, states));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PseudoLabels out;
  out.actions.resize(static_cast<std::size_t>(states.rows()));
  out.log_probs.resize(states.rows());
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    const double u = unif(rng);
    double cumulative = 0;
    Eigen::Index action = log_probs.cols() - 1;
    for (Eigen::Index c = 0; c < log_probs.cols(); ++c) {
      cumulative += std::exp(log_probs(i, c));
      if (u < cumulative) {
        action = c;
        break;
      }
    }
    out.actions[static_cast<std::size_t>(i)] = static_cast<int>(action);
    out.log_probs[i] = log_probs(i, action);
  }
  return out;
}

double eval_val_loss(const Mlp& classifier, const Batch& val_batch) {
  if (val_batch.features.rows() == 0) throw InvalidInput("empty validation batch");
  if (static_cast<Eigen::Index>(val_batch.labels.size()) != val_batch.features.rows())
    throw InvalidInput("validation batch contains unlabeled samples");
  return softmax_cross_entropy(mlp_logits(classifier, val_batch.features), std::span<const int>(val_batch.labels))
      .loss;
}

double eval_val_loss(const Mlp& classifier, const std::vector<Sample>& val_batch) {
  for (const auto& s : val_batch)
    if (!s.label) throw InvalidInput("validation sample " + s.id + " is unlabeled");
  return eval_val_loss(classifier, gather_batch(val_batch));
}

double compute_reward(double loss_before, double loss_after) {
  if (!std::isfinite(loss_before) || !std::isfinite(loss_after))
    throw InvalidInput("compute_reward: non-finite loss");
  if (loss_before < 0 || loss_after < 0) throw InvalidInput("compute_reward: negative loss");
  return std::max(std::exp(loss_before - loss_after) - 1.0, 0.0);
}

MlpGradients<double> classifier_gradients(const Mlp& classifier, const Batch& labeled, const MatrixXd& pseudo_states,
                                          std::span<const int> pseudo_labels, double pseudo_weight) {
  if (static_cast<Eigen::Index>(pseudo_labels.size()) != pseudo_states.rows())
    throw InvalidInput("pseudo labels do not match pseudo batch");
  if (static_cast<Eigen::Index>(labeled.labels.size()) != labeled.features.rows())
    throw InvalidInput("labeled batch has missing labels");
  const bool use_labeled = labeled.features.rows() > 0;
  const bool use_pseudo = pseudo_states.rows() > 0 && pseudo_weight != 0.0;
  if (labeled.features.rows() == 0 && pseudo_states.rows() == 0)
    throw InvalidInput("classifier step on an empty batch");

  MlpGradients<double> grads = zeros_like(classifier);
  if (use_labeled) {
    auto fwd = mlp_forward(classifier, labeled.features);
    const auto ce = softmax_cross_entropy(fwd.logits, std::span<const int>(labeled.labels));
    grads = mlp_backward(classifier, fwd.cache, ce.grad_logits);
  }
  if (use_pseudo) {
    auto fwd = mlp_forward(classifier, pseudo_states);
    const auto ce = softmax_cross_entropy(fwd.logits, pseudo_labels);
    add_scaled(grads, mlp_backward(classifier, fwd.cache, ce.grad_logits), pseudo_weight);
  }
  return grads;
}

void classifier_step(Mlp& classifier, const Batch& labeled, const MatrixXd& pseudo_states,
                     std::span<const int> pseudo_labels, Adam& optimizer, double pseudo_weight) {
  const auto grads = classifier_gradients(classifier, labeled, pseudo_states, pseudo_labels, pseudo_weight);
  optimizer_step(classifier, grads, optimizer);
}

double discounted_return(std::span<const double> rewards, double gamma, std::size_t t) {
  if (t >= rewards.size()) throw InvalidInput("discounted_return: index out of range");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must be in [0, 1]");
  double g = 0;
  for (std::size_t k = rewards.size(); k-- > t;) g = rewards[k] + gamma * g;
  return g;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must be in [0, 1]");
  std::vector<double> out(rewards.size());
  double g = 0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    g = rewards[k] + gamma * g;
    out[k] = g;
  }
  return out;
}

Trajectory::Trajectory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InvalidInput("trajectory capacity must be >= 1");
  steps_.reserve(capacity_);
}

void Trajectory::push(TrajectoryStep step) {
  if (full()) throw InvalidInput("trajectory already holds beta steps");
  if (!(step.reward >= 0.0) || !std::isfinite(step.reward)) throw InvalidInput("trajectory reward must be finite and >= 0");
  if (static_cast<Eigen::Index>(step.actions.size()) != step.states.rows() ||
      step.log_probs.size() != step.states.rows())
    throw InvalidInput("trajectory step shapes disagree");
  steps_.push_back(std::move(step));
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> r;
  r.reserve(steps_.size());
  for (const auto& s : steps_) r.push_back(s.reward);
  return r;
}

double policy_surrogate(const Mlp& policy, const Trajectory& trajectory, double gamma) {
  const auto rewards = trajectory.rewards();
  const auto returns = discounted_returns(rewards, gamma);
  double total = 0;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto& step = trajectory.steps()[t];
    if (step.states.rows() == 0) continue;
    const MatrixXd log_probs = log_softmax_rows(mlp_logits(policy, step.states));
    double mean = 0;
    for (Eigen::Index i = 0; i < log_probs.rows(); ++i) mean += log_probs(i, step.actions[static_cast<std::size_t>(i)]);
    total += returns[t] * mean / static_cast<double>(log_probs.rows());
  }
  return total;
}

MlpGradients<double> policy_surrogate_gradient(const Mlp& policy, const Trajectory& trajectory, double gamma) {
  const auto rewards = trajectory.rewards();
  const auto returns = discounted_returns(rewards, gamma);
  MlpGradients<double> grads = zeros_like(policy);
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto& step = trajectory.steps()[t];
    if (step.states.rows() == 0 || returns[t] == 0.0) continue;
    auto fwd = mlp_forward(policy, step.states);
    // d/dlogits of mean_i log softmax(z_i)[a_i] = (onehot(a_i) - p_i) / B
    MatrixXd d = -softmax_rows(fwd.logits);
    for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, step.actions[static_cast<std::size_t>(i)]) += 1.0;
    d *= returns[t] / static_cast<double>(d.rows());
    add_scaled(grads, mlp_backward(policy, fwd.cache, d), 1.0);
  }
  return grads;
}

void policy_update(Mlp& policy, Trajectory& trajectory, Adam& optimizer, double gamma) {
  if (trajectory.empty()) throw InvalidInput("policy_update on an empty trajectory");
  MlpGradients<double> ascent = policy_surrogate_gradient(policy, trajectory, gamma);
  // The optimizer descends, so hand it the gradient of -surrogate.
  for_each_block(ascent, ascent, [](auto& p, const auto&) { p = -p; });
  optimizer_step(policy, ascent, optimizer);
  trajectory.clear();
}

void write_history_csv(std::ostream& os, const History& history) {
  os << "kind,step,loss_val_before,loss_val_after,reward,policy_update_flag,epoch,test_accuracy,test_f1,test_auc\n";
  for (const auto& s : history.steps) {
    os << "step," << s.step << ',' << format_real(s.loss_val_before) << ',' << format_real(s.loss_val_after) << ','
       << format_real(s.reward) << ',' << (s.policy_update ? 1 : 0) << ',' << s.epoch << ",,,\n";
  }
  for (const auto& e : history.epochs) {
    os << "epoch,,,,,," << e.epoch << ',' << format_real(e.test.accuracy) << ',' << format_real(e.test.f1) << ','
       << format_real(e.test.auc) << '\n';
  }
}

MetricsReport evaluate(const Mlp& classifier, const std::vector<Sample>& samples) {
  const Batch b = gather_batch(samples);
  if (static_cast<Eigen::Index>(b.labels.size()) != b.features.rows() || b.labels.empty())
    throw InvalidInput("evaluation needs a non-empty labeled set");
  return evaluate_scores(softmax_rows(mlp_logits(classifier, b.features)), b.labels);
}

namespace {

Batch training_batch(const std::vector<Sample>& pool, const std::vector<std::size_t>& idx, const EngineConfig& cfg,
                     std::mt19937_64& augment_rng) {
  if (!cfg.augment) return gather_batch(pool, idx);
  std::vector<Sample> augmented;
  augmented.reserve(idx.size());
  for (auto i : idx) augmented.push_back(augment_weak(pool[i], augment_rng, cfg.crop_scale));
  return gather_batch(augmented);
}

void run_warmup(Mlp& classifier, Adam& optimizer, const std::vector<Sample>& labeled, BatchCycler& cycler,
                std::mt19937_64& augment_rng, const EngineConfig& cfg) {
  for (int s = 0; s < cfg.warmup_steps; ++s) {
    const Batch b = training_batch(labeled, cycler.next(), cfg, augment_rng);
    if (static_cast<Eigen::Index>(b.labels.size()) != b.features.rows())
      throw InvalidInput("warmup batch contains unlabeled samples");
    classifier_step(classifier, b, MatrixXd(0, b.features.cols()), {}, optimizer, 0.0);
  }
}

class TrainingRun {
 public:
  TrainingRun(const DatasetSplits& splits, const EngineConfig& cfg)
      : splits_(splits),
        cfg_(cfg),
        labeled_(splits.labeled_train.size(), static_cast<std::size_t>(cfg.batch_labeled),
                 make_stream(cfg.seed, Stream::labeled)),
        augment_rng_(make_stream(cfg.seed, Stream::augment)) {
    validate(cfg);
    if (splits.labeled_train.empty()) throw InvalidInput("labeled_train is empty");
    for (const auto& s : splits.labeled_train)
      if (!s.label) throw InvalidInput("labeled_train sample " + s.id + " has no label");
    if (cfg.augment) {
      for (const auto* part : {&splits.labeled_train, &splits.unlabeled_train})
        for (const auto& s : *part)
          if (!s.grid) throw InvalidInput("augmentation requires grid dims on every training sample");
    }
    classifier_ = make_classifier(splits.labeled_train.front().features.size(), cfg);
    optimizer_ = make_adamw_state(classifier_, classifier_optimizer_config(cfg));
  }

  Batch next_labeled() { return training_batch(splits_.labeled_train, labeled_.next(), cfg_, augment_rng_); }

  Batch batch_from(const std::vector<Sample>& pool, const std::vector<std::size_t>& idx) {
    return training_batch(pool, idx, cfg_, augment_rng_);
  }

  void warmup() { run_warmup(classifier_, optimizer_, splits_.labeled_train, labeled_, augment_rng_, cfg_); }

  std::int64_t steps_per_epoch() const {
    const auto n = static_cast<std::int64_t>(splits_.labeled_train.size());
    return (n + cfg_.batch_labeled - 1) / cfg_.batch_labeled;
  }

  Mlp& classifier() { return classifier_; }
  Adam& optimizer() { return optimizer_; }
  const EngineConfig& cfg() const { return cfg_; }
  const DatasetSplits& splits() const { return splits_; }

 private:
  const DatasetSplits& splits_;
  EngineConfig cfg_;
  BatchCycler labeled_;
  std::mt19937_64 augment_rng_;
  Mlp classifier_;
  Adam optimizer_;
};

void check_eval_splits(const DatasetSplits& splits) {
  if (splits.test.empty()) throw InvalidInput("test split is empty");
  for (const auto& s : splits.test)
    if (!s.label) throw InvalidInput("test sample " + s.id + " has no label");
}

EpochRecord epoch_record(int epoch, const Mlp& classifier, const DatasetSplits& splits) {
  return EpochRecord{epoch, evaluate(classifier, splits.test)};
}

}  // namespace

Mlp warmup_supervised(Mlp classifier, const std::vector<Sample>& labeled, const EngineConfig& cfg) {
  validate(cfg);
  if (labeled.empty()) throw InvalidInput("warmup needs labeled samples");
  BatchCycler cycler(labeled.size(), static_cast<std::size_t>(cfg.batch_labeled), make_stream(cfg.seed, Stream::labeled));
  auto aug_rng = make_stream(cfg.seed, Stream::augment);
  Adam opt = make_adamw_state(classifier, classifier_optimizer_config(cfg));
  run_warmup(classifier, opt, labeled, cycler, aug_rng, cfg);
  return classifier;
}

TrainResult train(const DatasetSplits& splits, const EngineConfig& cfg) {
  check_eval_splits(splits);
  if (splits.validation.empty()) throw InvalidInput("validation split is empty");
  TrainingRun run(splits, cfg);
  run.warmup();

  TrainResult result;
  Mlp policy = cfg.policy_init == PolicyInit::clone_classifier
                   ? run.classifier()
                   : [&] {
                       auto rng = make_stream(cfg.seed ^ 0xa5a5a5a5ULL, Stream::init);
                       auto dims = run.classifier().layer_dims();
                       return make_mlp<double>(dims, rng);
                     }();
  Adam policy_opt = make_adamw_state(policy, policy_optimizer_config(cfg));
  BatchCycler unlabeled(splits.unlabeled_train.size(), static_cast<std::size_t>(cfg.batch_unlabeled),
                        make_stream(cfg.seed, Stream::unlabeled));
  BatchCycler validation(splits.validation.size(), static_cast<std::size_t>(cfg.batch_val),
                         make_stream(cfg.seed, Stream::validation));
  auto policy_rng = make_stream(cfg.seed, Stream::policy);
  Trajectory trajectory(static_cast<std::size_t>(cfg.beta));
  const Eigen::Index dim = run.classifier().input_dim();

  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::int64_t s = 0; s < run.steps_per_epoch(); ++s) {
      const Batch labeled = run.next_labeled();
      Batch pseudo{MatrixXd(0, dim), {}};
      if (unlabeled.size() > 0) pseudo = run.batch_from(splits.unlabeled_train, unlabeled.next());
      const Batch val = gather_batch(splits.validation, validation.next());

      const double loss_before = eval_val_loss(run.classifier(), val);
      PseudoLabels actions;
      if (pseudo.features.rows() > 0) actions = sample_pseudo_labels(policy, pseudo.features, policy_rng);
      classifier_step(run.classifier(), labeled, pseudo.features, actions.actions, run.optimizer(),
                      cfg.pseudo_loss_weight);
      const double loss_after = eval_val_loss(run.classifier(), val);
      const double reward = compute_reward(loss_before, loss_after);

      trajectory.push(TrajectoryStep{std::move(pseudo.features), std::move(actions.actions),
                                     std::move(actions.log_probs), reward});
      StepRecord rec{step, epoch, loss_before, loss_after, reward, false};
      if (trajectory.full()) {
        policy_update(policy, trajectory, policy_opt, cfg.gamma);
        rec.policy_update = true;
        ++result.history.policy_updates;
      }
      result.history.steps.push_back(rec);
      ++step;
    }
    result.history.epochs.push_back(epoch_record(epoch, run.classifier(), splits));
  }

  result.test_metrics = evaluate(run.classifier(), splits.test);
  result.classifier = run.classifier();
  result.policy = std::move(policy);
  return result;
}

TrainResult train_supervised_only(const DatasetSplits& splits, const EngineConfig& cfg) {
  check_eval_splits(splits);
  TrainingRun run(splits, cfg);
  run.warmup();
  TrainResult result;
  const Eigen::Index dim = run.classifier().input_dim();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::int64_t s = 0; s < run.steps_per_epoch(); ++s) {
      const Batch labeled = run.next_labeled();
      classifier_step(run.classifier(), labeled, MatrixXd(0, dim), {}, run.optimizer(), 0.0);
    }
    result.history.epochs.push_back(epoch_record(epoch, run.classifier(), splits));
  }
  result.test_metrics = evaluate(run.classifier(), splits.test);
  result.classifier = run.classifier();
  return result;
}

TrainResult train_self_training(const DatasetSplits& splits, const EngineConfig& cfg, double confidence_threshold) {
  if (!(confidence_threshold > 0.5 && confidence_threshold <= 1.0))
    throw InvalidInput("confidence threshold must be in (0.5, 1]");
  check_eval_splits(splits);
  TrainingRun run(splits, cfg);
  run.warmup();
  TrainResult result;
  const Eigen::Index dim = run.classifier().input_dim();
  const Batch all_unlabeled = gather_batch(splits.unlabeled_train);
  auto pool_rng = make_stream(cfg.seed, Stream::unlabeled);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Rebuild the accepted pool from the current classifier.
    std::vector<Sample> pool;
    SelfTrainingEpoch stats{epoch, 0, 0, 0};
    if (all_unlabeled.features.rows() > 0) {
      const MatrixXd probs = softmax_rows(mlp_logits(run.classifier(), all_unlabeled.features));
      for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index arg = 0;
        const double confidence = probs.row(i).maxCoeff(&arg);
        if (confidence < confidence_threshold) continue;
        Sample s = splits.unlabeled_train[static_cast<std::size_t>(i)];
        if (s.hidden_label) {
          ++stats.with_truth;
          stats.correct += *s.hidden_label == static_cast<int>(arg);
        }
        s.label = static_cast<int>(arg);
        pool.push_back(std::move(s));
      }
    }
    stats.selected = pool.size();
    result.self_training.push_back(stats);

    BatchCycler pseudo_cycler(pool.size(), static_cast<std::size_t>(cfg.batch_unlabeled), std::mt19937_64(pool_rng()));
    for (std::int64_t s = 0; s < run.steps_per_epoch(); ++s) {
      const Batch labeled = run.next_labeled();
      Batch pseudo{MatrixXd(0, dim), {}};
      if (!pool.empty()) pseudo = run.batch_from(pool, pseudo_cycler.next());
      classifier_step(run.classifier(), labeled, pseudo.features, pseudo.labels, run.optimizer(),
                      cfg.pseudo_loss_weight);
    }
    result.history.epochs.push_back(epoch_record(epoch, run.classifier(), splits));
  }
  result.test_metrics = evaluate(run.classifier(), splits.test);
  result.classifier = run.classifier();
  return result;
}

}  // namespace pseudosup
