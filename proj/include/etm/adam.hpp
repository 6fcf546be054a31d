#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "etm/tensor.hpp"

namespace etm {

struct AdamConfig {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled L2 decay, applied only to parameters registered with
  // decay = true (the inference-network weights).
  double weight_decay = 0.0;
};

// First/second moment accumulators plus step count for a fixed set of
// parameters. Register the parameter shapes once, then call adam_step
// with matching value/gradient lists every iteration.
class AdamState {
public:
  AdamState(AdamConfig config, std::span<const Tensor* const> params,
            const std::vector<bool>& decay_flags);

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }
  const Tensor& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor& second_moment(std::size_t i) const { return v_[i]; }

private:
  friend void adam_step(std::span<Tensor* const>, std::span<const Tensor>, AdamState&);

  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_, v_;
  std::vector<bool> decay_;
};

// One bias-corrected Adam update, in place.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               AdamState& state);

}  // namespace etm
