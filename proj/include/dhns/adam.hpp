#pragma once

#include <cstdint>
#include <vector>

#include "dhns/types.hpp"

namespace dhns {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment accumulators mirror the parameter list the state was created for.
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

AdamState make_adam_state(const AdamOptions& options, const std::vector<TensorRef>& params);

// Bias-corrected Adam update:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
void adam_step(AdamState& state, const std::vector<TensorRef>& params,
               const std::vector<TensorRef>& grads);

}  // namespace dhns
