#pragma once

#include <cstdint>

#include "pseudosup/mlp.hpp"

namespace pseudosup {

template <typename Scalar>
struct AdamWConfig {
  Scalar learning_rate = Scalar(4e-5);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  Scalar weight_decay = Scalar(0);
};

/// First/second moment accumulators laid out like the parameters they track.
template <typename Scalar>
struct AdamWState {
  AdamWConfig<Scalar> config;
  MlpModel<Scalar> first_moment;
  MlpModel<Scalar> second_moment;
  std::int64_t step = 0;
};

template <typename Scalar>
AdamWState<Scalar> make_adamw_state(const MlpModel<Scalar>& params, const AdamWConfig<Scalar>& config) {
  if (!(config.learning_rate >= Scalar(0)) || !(config.epsilon > Scalar(0)) ||
      !(config.beta1 >= Scalar(0) && config.beta1 < Scalar(1)) ||
      !(config.beta2 >= Scalar(0) && config.beta2 < Scalar(1)) || !(config.weight_decay >= Scalar(0)))
    throw InvalidInput("invalid AdamW hyperparameters");
  return AdamWState<Scalar>{config, zeros_like(params), zeros_like(params), 0};
}

/// One decoupled-weight-decay Adam update.
///
/// p <- p - lr * wd * p, then p <- p - lr * m_hat / (sqrt(v_hat) + eps) with
/// bias-corrected moments.
template <typename Scalar>
void optimizer_step(MlpModel<Scalar>& params, const MlpGradients<Scalar>& grads, AdamWState<Scalar>& state) {
  if (!same_shape(params, grads) || !same_shape(params, state.first_moment) ||
      !same_shape(params, state.second_moment))
    throw InvalidInput("optimizer_step: parameter, gradient and state shapes differ");
  for (std::size_t k = 0; k < grads.num_layers(); ++k)
    if (!grads.weights[k].allFinite() || !grads.biases[k].allFinite())
      throw InvalidInput("optimizer_step: non-finite gradient");

  const auto& c = state.config;
  state.step += 1;
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar bias1 = Scalar(1) - std::pow(c.beta1, t);
  const Scalar bias2 = Scalar(1) - std::pow(c.beta2, t);

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    if (c.weight_decay != Scalar(0)) p *= Scalar(1) - c.learning_rate * c.weight_decay;
    m = c.beta1 * m + (Scalar(1) - c.beta1) * g;
    v = c.beta2 * v + (Scalar(1) - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + c.epsilon);
  };
  for (std::size_t k = 0; k < params.num_layers(); ++k) {
    update(params.weights[k], grads.weights[k], state.first_moment.weights[k], state.second_moment.weights[k]);
    update(params.biases[k], grads.biases[k], state.first_moment.biases[k], state.second_moment.biases[k]);
  }
}

}  // namespace pseudosup
