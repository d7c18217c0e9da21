#pragma once

#include <span>
#include <vector>

#include "motionbeat/encoder.hpp"

namespace motionbeat {

struct AdamWSettings {
  double learning_rate = 2e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamWState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;
};

// One AdamW update of every trainable tensor. Weight decay is decoupled:
// p <- p - lr * decay * p, then p <- p - lr * m_hat / (sqrt(v_hat) + eps).
// Frozen tensors are left untouched. Throws NumericError naming the first
// tensor with a non-finite gradient, before any tensor is modified.
void adamw_step(std::vector<NamedTensor>& params, std::span<const Matrix> grads, AdamWState& state,
                const AdamWSettings& settings);

}  // namespace motionbeat
