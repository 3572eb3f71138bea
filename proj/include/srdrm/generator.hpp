#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "srdrm/ops.hpp"
#include "srdrm/params.hpp"
#include "srdrm/tensor.hpp"

namespace srdrm {

// Architecture of the super-resolution generator: scale_exp DRM blocks, each
// doubling spatial extent, followed by a 3x3 conv to RGB and tanh.
struct GeneratorConfig {
  int scale_exp = 1;        // n in {1, 2, 3}; output is 2^n times the input
  int base_filters = 64;    // width of every DRM-internal layer
  int residual_layers = 8;  // residual units per DRM block
  bool use_bn_in_drm = false;
  double leaky_slope = 0.2;

  int scale() const { return 1 << scale_exp; }
  void validate() const;  // throws ConfigError

  // Desk-scale profile: 16 filters, 2 residual layers.
  static GeneratorConfig tiny(int scale_exp);

  bool operator==(const GeneratorConfig&) const = default;
};

// conv3x3 -> [BN] -> ReLU -> conv3x3 -> [BN], added onto the unit input.
template <typename T>
struct ResidualUnit {
  ConvParams<T> first;
  std::optional<BnParams<T>> first_bn;
  ConvParams<T> second;
  std::optional<BnParams<T>> second_bn;
};

// Deep residual multiplier: conv4x4 -> residual units -> conv4x4 ->
// deconv4x4/2 -> ReLU. Doubles height and width.
template <typename T>
struct DrmBlock {
  ConvParams<T> head;
  std::vector<ResidualUnit<T>> units;
  ConvParams<T> tail;
  ConvParams<T> upsample;
};

template <typename T>
struct UnitPass {
  Tensor4<T> input;
  Tensor4<T> first_out;
  std::optional<BnResult<T>> first_bn;
  Tensor4<T> activated;
  Tensor4<T> second_out;
  std::optional<BnResult<T>> second_bn;
};

template <typename T>
struct BlockPass {
  Tensor4<T> input;
  Tensor4<T> head_out;
  std::vector<UnitPass<T>> units;
  Tensor4<T> residual_out;
  Tensor4<T> tail_out;
  Tensor4<T> upsampled;
  Tensor4<T> output;
};

// Every intermediate activation of one forward pass, kept for backward.
template <typename T>
struct GeneratorPass {
  std::vector<BlockPass<T>> blocks;
  Tensor4<T> pre_tanh;
  Tensor4<T> output;
};

template <typename T>
class Generator {
 public:
  Generator(GeneratorConfig config, std::vector<DrmBlock<T>> blocks,
            ConvParams<T> output);

  const GeneratorConfig& config() const { return config_; }
  const std::vector<DrmBlock<T>>& blocks() const { return blocks_; }
  const ConvParams<T>& output_layer() const { return output_; }

  // (N, 3, H, W) in [-1, 1] -> (N, 3, 2^n H, 2^n W) in [-1, 1].
  Tensor4<T> forward(const Tensor4<T>& x, BnMode mode = BnMode::infer) const;
  GeneratorPass<T> forward_pass(const Tensor4<T>& x, BnMode mode) const;

  // Parameter gradients, returned as a generator-shaped container whose
  // trainable tensors hold d(loss)/d(param).
  Generator backward(const GeneratorPass<T>& pass,
                     const Tensor4<T>& d_output) const;

  // Writes the running statistics produced by a train-mode pass.
  void commit_running_stats(const GeneratorPass<T>& pass);

  std::vector<ParamView<T>> parameters();
  std::vector<ParamView<const T>> parameters() const;
  std::vector<ParamView<T>> buffers();
  std::vector<ParamView<const T>> buffers() const;
  std::size_t parameter_count() const;

  Generator zeros_like() const;

  template <typename U>
  Generator<U> cast() const;

 private:
  template <typename Self, typename V>
  static void collect(Self& self, std::vector<ParamView<V>>& out,
                      bool running_stats);

  GeneratorConfig config_;
  std::vector<DrmBlock<T>> blocks_;
  ConvParams<T> output_;
};

template <typename T>
Generator<T> build_generator(const GeneratorConfig& config,
                             std::uint64_t seed);

// Closed-form trainable parameter count for a configuration.
std::size_t generator_parameter_count(const GeneratorConfig& config);

extern template class Generator<float>;
extern template class Generator<double>;

}  // namespace srdrm
