#pragma once

#include <cstddef>
#include <vector>

#include "srdrm/tensor.hpp"

namespace srdrm {

// Zero padding added before (top/left) and after (bottom/right) each spatial
// axis. Even kernels with stride 1 need the asymmetric form to keep extents.
struct Padding {
  int begin = 0;
  int end = 0;

  static constexpr Padding symmetric(int p) { return {p, p}; }
  // Output extent equals input extent for stride 1 (extra pixel goes after).
  static constexpr Padding same(int kernel) {
    return {(kernel - 1) / 2, kernel - 1 - (kernel - 1) / 2};
  }
  bool operator==(const Padding&) const = default;
};

// Weights are (out_channels, in_channels, kH, kW) for both conv2d and
// deconv2d.
template <typename T>
struct ConvParams {
  Tensor4<T> weights;
  std::vector<T> bias;
  int stride = 1;
  Padding padding;

  std::size_t out_channels() const { return weights.shape().n; }
  std::size_t in_channels() const { return weights.shape().c; }
  std::size_t kernel_h() const { return weights.shape().h; }
  std::size_t kernel_w() const { return weights.shape().w; }
};

template <typename T>
struct ConvGradients {
  Tensor4<T> d_input;  // empty when the input gradient was not requested
  Tensor4<T> d_weights;
  std::vector<T> d_bias;
};

// floor((in + pad.begin + pad.end - kernel) / stride) + 1; ConfigError if < 1.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, int stride,
                               Padding pad);
// stride * (in - 1) + kernel - pad.begin - pad.end; ConfigError if < 1.
std::size_t deconv_output_extent(std::size_t in, std::size_t kernel,
                                 int stride, Padding pad);

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& input, const ConvParams<T>& params);

template <typename T>
ConvGradients<T> conv2d_backward(const Tensor4<T>& input,
                                 const ConvParams<T>& params,
                                 const Tensor4<T>& upstream,
                                 bool need_input_grad = true);

// d_input alone, for frozen layers.
template <typename T>
Tensor4<T> conv2d_backward_input(const Tensor4<T>& input, const ConvParams<T>& params,
                                 const Tensor4<T>& upstream);

template <typename T>
Tensor4<T> deconv2d(const Tensor4<T>& input, const ConvParams<T>& params);

template <typename T>
ConvGradients<T> deconv2d_backward(const Tensor4<T>& input,
                                   const ConvParams<T>& params,
                                   const Tensor4<T>& upstream,
                                   bool need_input_grad = true);

enum class BnMode { train, infer };

// Running statistics follow running = (1 - momentum) * running +
// momentum * batch; the running variance uses the unbiased batch variance.
template <typename T>
struct BnParams {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  std::size_t channels() const { return gamma.size(); }
  static BnParams identity(std::size_t channels);
};

// Output of a batch-norm forward pass. The updated running statistics are
// returned rather than written back; callers decide whether to commit them.
template <typename T>
struct BnResult {
  Tensor4<T> output;
  Tensor4<T> normalized;
  std::vector<T> inv_std;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  BnMode mode = BnMode::infer;
};

template <typename T>
struct BnGradients {
  Tensor4<T> d_input;
  std::vector<T> d_gamma;
  std::vector<T> d_beta;
};

template <typename T>
BnResult<T> batchnorm(const Tensor4<T>& input, const BnParams<T>& params,
                      BnMode mode);

template <typename T>
BnGradients<T> batchnorm_backward(const BnResult<T>& forward,
                                  const BnParams<T>& params,
                                  const Tensor4<T>& upstream);

enum class ActivationKind { relu, leaky_relu, tanh, sigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double slope = 0.2;  // leaky_relu only

  static constexpr Activation relu() { return {ActivationKind::relu, 0.0}; }
  static constexpr Activation leaky_relu(double slope = 0.2) {
    return {ActivationKind::leaky_relu, slope};
  }
  static constexpr Activation tanh() { return {ActivationKind::tanh, 0.0}; }
  static constexpr Activation sigmoid() {
    return {ActivationKind::sigmoid, 0.0};
  }
};

template <typename T>
Tensor4<T> activate(const Tensor4<T>& input, Activation act);

// `output` must be activate(input, act); tanh and sigmoid differentiate
// through it.
template <typename T>
Tensor4<T> activate_backward(const Tensor4<T>& input, const Tensor4<T>& output,
                             Activation act, const Tensor4<T>& upstream);

}  // namespace srdrm
