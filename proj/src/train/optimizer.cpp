#include "srdrm/optimizer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "srdrm/errors.hpp"

namespace srdrm {

void adam_step(const std::vector<ParamView<float>>& params,
               const std::vector<ParamView<const float>>& grads, AdamState& state,
               const AdamParams& hyper) {
  if (params.size() != grads.size()) {
    throw ContractError(fmt::format("adam: {} parameter tensors but {} gradients",
                                    params.size(), grads.size()));
  }
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.values.size(), 0.0);
      state.v.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError(fmt::format("adam: state holds {} tensors, model has {}",
                                    state.m.size(), params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].values.size();
    if (grads[i].values.size() != n || state.m[i].size() != n || state.v[i].size() != n) {
      throw ContractError(fmt::format("adam: size mismatch for '{}' ({} values, {} gradients)",
                                      params[i].name, n, grads[i].values.size()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i].values.data();
    const float* g = grads[i].values.data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const auto n = static_cast<std::ptrdiff_t>(params[i].values.size());
#pragma omp parallel for if (n > 65536)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const double gk = g[k];
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * gk;
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * gk * gk;
      const double update =
          hyper.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + hyper.epsilon);
      p[k] = static_cast<float>(static_cast<double>(p[k]) - update);
    }
  }
}

}  // namespace srdrm
