#include "etm/adam.hpp"

#include <cmath>

namespace etm {

AdamState::AdamState(AdamConfig config, std::span<const Tensor* const> params,
                     const std::vector<bool>& decay_flags)
    : config_(config) {
  if (params.size() != decay_flags.size())
    throw ShapeMismatch("AdamState: decay flag count does not match parameter count");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.push_back(Tensor::zeros(p->shape));
    v_.push_back(Tensor::zeros(p->shape));
  }
  decay_.assign(decay_flags.begin(), decay_flags.end());
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m_.size())
    throw ShapeMismatch("adam_step: parameter/gradient count mismatch");
  const AdamConfig& c = state.config_;
  state.step_ += 1;
  double t = static_cast<double>(state.step_);
  double bc1 = 1.0 - std::pow(c.beta1, t);
  double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.m_[i]))
      throw ShapeMismatch("adam_step: shape mismatch for parameter " + std::to_string(i));
    Tensor& m = state.m_[i];
    Tensor& v = state.v_[i];
    bool decay = state.decay_[i] && c.weight_decay > 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m.data[j] = c.beta1 * m.data[j] + (1.0 - c.beta1) * g.data[j];
      v.data[j] = c.beta2 * v.data[j] + (1.0 - c.beta2) * g.data[j] * g.data[j];
      double mhat = m.data[j] / bc1;
      double vhat = v.data[j] / bc2;
      double upd = mhat / (std::sqrt(vhat) + c.eps);
      if (decay) upd += c.weight_decay * p.data[j];
      p.data[j] -= c.learning_rate * upd;
    }
    check_finite(p, "adam_step");
  }
}

}  // namespace etm
