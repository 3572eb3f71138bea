#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "srdrm/ops.hpp"
#include "srdrm/params.hpp"
#include "srdrm/tensor.hpp"

namespace srdrm {

// Markovian (PatchGAN) discriminator: 3x3 convs, each but the last followed
// by Leaky-ReLU then BN; the last maps to one channel through a sigmoid.
struct DiscriminatorConfig {
  int layers = 9;
  std::vector<int> stride_layout{2, 2, 2, 2, 1, 1, 1, 1, 1};
  int base_filters = 32;  // doubled after every stride-2 layer
  int max_filters = 256;
  double leaky_slope = 0.2;

  void validate() const;  // throws ConfigError
  // Width of hidden layer i (0-based, i < layers - 1).
  int filters_at(int layer) const;
  // Product of all strides (16 for every valid configuration).
  int downsample_factor() const;

  // Desk-scale profile: 8 base filters capped at 32.
  static DiscriminatorConfig tiny();

  bool operator==(const DiscriminatorConfig&) const = default;
};

template <typename T>
struct DiscriminatorLayer {
  ConvParams<T> conv;
  std::optional<BnParams<T>> bn;  // absent on the final layer
};

template <typename T>
struct DiscriminatorLayerPass {
  Tensor4<T> input;
  Tensor4<T> conv_out;
  Tensor4<T> activated;
  std::optional<BnResult<T>> bn;
  Tensor4<T> output;
};

template <typename T>
struct DiscriminatorPass {
  std::vector<DiscriminatorLayerPass<T>> layers;
  Tensor4<T> output;  // validity map in (0, 1)
};

template <typename T>
class Discriminator;

template <typename T>
struct DiscriminatorGradients;

template <typename T>
class Discriminator {
 public:
  Discriminator(DiscriminatorConfig config,
                std::vector<DiscriminatorLayer<T>> layers);

  const DiscriminatorConfig& config() const { return config_; }
  const std::vector<DiscriminatorLayer<T>>& layers() const { return layers_; }

  // Validity map (N, 1, ceil(H/16), ceil(W/16)) for the channel concatenation
  // (condition, candidate). Both inputs must be (N, 3, H, W).
  Tensor4<T> forward(const Tensor4<T>& candidate, const Tensor4<T>& condition,
                     BnMode mode = BnMode::infer) const;
  DiscriminatorPass<T> forward_pass(const Tensor4<T>& candidate,
                                    const Tensor4<T>& condition,
                                    BnMode mode) const;
  DiscriminatorGradients<T> backward(const DiscriminatorPass<T>& pass,
                                     const Tensor4<T>& d_output,
                                     bool need_candidate_grad) const;
  void commit_running_stats(const DiscriminatorPass<T>& pass);

  std::vector<ParamView<T>> parameters();
  std::vector<ParamView<const T>> parameters() const;
  std::vector<ParamView<T>> buffers();
  std::vector<ParamView<const T>> buffers() const;
  std::size_t parameter_count() const;

  Discriminator zeros_like() const;

 private:
  template <typename Self, typename V>
  static void collect(Self& self, std::vector<ParamView<V>>& out,
                      bool running_stats);

  DiscriminatorConfig config_;
  std::vector<DiscriminatorLayer<T>> layers_;
};

template <typename T>
struct DiscriminatorGradients {
  Discriminator<T> params;
  Tensor4<T> d_candidate;  // empty unless requested
};

template <typename T>
Discriminator<T> build_discriminator(const DiscriminatorConfig& config,
                                     std::uint64_t seed);

extern template class Discriminator<float>;
extern template class Discriminator<double>;

}  // namespace srdrm
