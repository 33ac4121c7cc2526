#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "pseudosup/types.hpp"

namespace pseudosup {

/// Fully connected network with rectifier hidden units and raw-logit output.
///
/// Layer `k` maps a `B x dims[k]` batch to `B x dims[k+1]` as `X * W_k + b_k`,
/// so `weights[k]` is `dims[k] x dims[k+1]` and `biases[k]` is `1 x dims[k+1]`.
template <typename Scalar>
struct MlpModel {
  std::vector<Matrix<Scalar>> weights;
  std::vector<RowVector<Scalar>> biases;

  std::size_t num_layers() const { return weights.size(); }
  Eigen::Index input_dim() const { return weights.front().rows(); }
  Eigen::Index output_dim() const { return weights.back().cols(); }

  std::vector<Eigen::Index> layer_dims() const {
    std::vector<Eigen::Index> dims;
    if (weights.empty()) return dims;
    dims.push_back(weights.front().rows());
    for (const auto& w : weights) dims.push_back(w.cols());
    return dims;
  }

  Eigen::Index num_parameters() const {
    Eigen::Index n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
    return n;
  }

  bool operator==(const MlpModel& other) const {
    if (weights.size() != other.weights.size()) return false;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k].rows() != other.weights[k].rows() ||
          weights[k].cols() != other.weights[k].cols() || weights[k] != other.weights[k] ||
          biases[k] != other.biases[k])
        return false;
    }
    return true;
  }
};

/// Gradients share the parameter layout of the model they belong to.
template <typename Scalar>
using MlpGradients = MlpModel<Scalar>;

template <typename Scalar>
void validate_dims(std::span<const Eigen::Index> dims) {
  if (dims.size() < 2) throw InvalidInput("mlp needs at least an input and an output dimension");
  for (auto d : dims)
    if (d < 1) throw InvalidInput("mlp layer dimensions must be positive");
}

template <typename Scalar>
MlpModel<Scalar> make_zero_mlp(std::span<const Eigen::Index> dims) {
  validate_dims<Scalar>(dims);
  MlpModel<Scalar> model;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    model.weights.push_back(Matrix<Scalar>::Zero(dims[k], dims[k + 1]));
    model.biases.push_back(RowVector<Scalar>::Zero(dims[k + 1]));
  }
  return model;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
template <typename Scalar, typename Rng>
MlpModel<Scalar> make_mlp(std::span<const Eigen::Index> dims, Rng& rng) {
  MlpModel<Scalar> model = make_zero_mlp<Scalar>(dims);
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(dims[k]));
    std::uniform_real_distribution<Scalar> dist(-bound, bound);
    for (Eigen::Index i = 0; i < model.weights[k].size(); ++i) model.weights[k].data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < model.biases[k].size(); ++i) model.biases[k].data()[i] = dist(rng);
  }
  return model;
}

template <typename Scalar>
MlpModel<Scalar> zeros_like(const MlpModel<Scalar>& model) {
  const auto dims = model.layer_dims();
  return make_zero_mlp<Scalar>(dims);
}

template <typename Scalar>
bool same_shape(const MlpModel<Scalar>& a, const MlpModel<Scalar>& b) {
  return a.layer_dims() == b.layer_dims();
}

/// Applies `fn(param, other)` to every parameter block pair, weights then bias per layer.
template <typename Scalar, typename Fn>
void for_each_block(MlpModel<Scalar>& a, const MlpModel<Scalar>& b, Fn&& fn) {
  if (!same_shape(a, b)) throw InvalidInput("parameter shapes do not match");
  for (std::size_t k = 0; k < a.num_layers(); ++k) {
    fn(a.weights[k], b.weights[k]);
    fn(a.biases[k], b.biases[k]);
  }
}

/// acc += scale * other
template <typename Scalar>
void add_scaled(MlpModel<Scalar>& acc, const MlpModel<Scalar>& other, Scalar scale) {
  for_each_block(acc, other, [scale](auto& p, const auto& q) { p += scale * q; });
}

/// Activations kept from a forward pass.
template <typename Scalar>
struct MlpCache {
  std::vector<Eigen::Index> layer_dims;
  std::vector<Matrix<Scalar>> layer_inputs;  // input to layer k (post-activation of k-1)
  std::vector<Matrix<Scalar>> pre_activations;  // hidden layers only

  Eigen::Index batch_size() const { return layer_inputs.empty() ? 0 : layer_inputs.front().rows(); }
};

template <typename Scalar>
struct ForwardResult {
  Matrix<Scalar> logits;
  MlpCache<Scalar> cache;
};

namespace detail {

template <typename Scalar>
void check_batch(const MlpModel<Scalar>& model, const Matrix<Scalar>& batch) {
  if (model.num_layers() == 0) throw InvalidInput("mlp has no layers");
  if (batch.cols() != model.input_dim())
    throw InvalidInput("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                       std::to_string(model.input_dim()));
  if (!batch.allFinite()) throw InvalidInput("batch contains non-finite values");
}

}  // namespace detail

template <typename Scalar>
ForwardResult<Scalar> mlp_forward(const MlpModel<Scalar>& model, const std::type_identity_t<Matrix<Scalar>>& batch) {
  detail::check_batch(model, batch);
  ForwardResult<Scalar> out;
  out.cache.layer_dims = model.layer_dims();
  Matrix<Scalar> h = batch;
  const std::size_t last = model.num_layers() - 1;
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    Matrix<Scalar> z = h * model.weights[k];
    z.rowwise() += model.biases[k];
    out.cache.layer_inputs.push_back(std::move(h));
    if (k == last) {
      out.logits = std::move(z);
    } else {
      h = z.cwiseMax(Scalar(0));
      out.cache.pre_activations.push_back(std::move(z));
    }
  }
  return out;
}

/// Forward pass without keeping activations.
template <typename Scalar>
Matrix<Scalar> mlp_logits(const MlpModel<Scalar>& model, const std::type_identity_t<Matrix<Scalar>>& batch) {
  detail::check_batch(model, batch);
  Matrix<Scalar> h = batch;
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    Matrix<Scalar> z = h * model.weights[k];
    z.rowwise() += model.biases[k];
    h = (k + 1 == model.num_layers()) ? std::move(z) : Matrix<Scalar>(z.cwiseMax(Scalar(0)));
  }
  return h;
}

template <typename Scalar>
MlpGradients<Scalar> mlp_backward(const MlpModel<Scalar>& model, const MlpCache<Scalar>& cache,
                                  const std::type_identity_t<Matrix<Scalar>>& grad_logits) {
  if (cache.layer_dims != model.layer_dims() ||
      cache.layer_inputs.size() != model.num_layers() ||
      cache.pre_activations.size() + 1 != model.num_layers())
    throw InvalidInput("forward cache does not belong to this model");
  if (grad_logits.rows() != cache.batch_size() || grad_logits.cols() != model.output_dim())
    throw InvalidInput("gradient shape does not match the cached forward pass");

  MlpGradients<Scalar> grads = zeros_like(model);
  Matrix<Scalar> delta = grad_logits;
  for (std::size_t k = model.num_layers(); k-- > 0;) {
    grads.weights[k].noalias() = cache.layer_inputs[k].transpose() * delta;
    grads.biases[k] = delta.colwise().sum();
    if (k == 0) break;
    Matrix<Scalar> upstream = delta * model.weights[k].transpose();
    const auto& z = cache.pre_activations[k - 1];
    delta = (z.array() > Scalar(0)).select(upstream, Scalar(0));
  }
  return grads;
}

template <typename Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar m = out.row(i).maxCoeff();
    out.row(i).array() -= m;
    const Scalar lse = std::log(out.row(i).array().exp().sum());
    out.row(i).array() -= lse;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out = log_softmax_rows(logits).array().exp().matrix();
  // Renormalise so rows sum to one to the last ulp that matters.
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
  return out;
}

template <typename Scalar>
struct CrossEntropy {
  Scalar loss;
  Matrix<Scalar> grad_logits;
};

/// Mean cross-entropy of `labels` under softmax(`logits`) and its gradient.
template <typename Scalar>
CrossEntropy<Scalar> softmax_cross_entropy(const Matrix<Scalar>& logits, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw InvalidInput("label count does not match logits rows");
  if (logits.rows() == 0) throw InvalidInput("cross-entropy of an empty batch");
  if (!logits.allFinite()) throw InvalidInput("logits contain non-finite values");
  const Eigen::Index classes = logits.cols();
  for (int y : labels)
    if (y < 0 || y >= classes) throw InvalidInput("label " + std::to_string(y) + " out of range");

  const Matrix<Scalar> log_probs = log_softmax_rows(logits);
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(logits.rows());
  CrossEntropy<Scalar> out{Scalar(0), log_probs.array().exp().matrix()};
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    out.loss -= log_probs(i, y);
    out.grad_logits(i, y) -= Scalar(1);
  }
  out.loss *= inv_b;
  out.grad_logits *= inv_b;
  return out;
}

}  // namespace pseudosup
