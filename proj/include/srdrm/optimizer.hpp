#pragma once

#include <cstdint>
#include <vector>

#include "srdrm/params.hpp"

namespace srdrm {

struct AdamParams {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamParams&) const = default;
};

// First and second moment estimates, one vector per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

// Bias-corrected Adam:
//   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
//   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// The state is sized on first use. ContractError when the parameter and
// gradient lists (or the state) disagree in count or sizes.
void adam_step(const std::vector<ParamView<float>>& params,
               const std::vector<ParamView<const float>>& grads, AdamState& state,
               const AdamParams& hyper);

}  // namespace srdrm
