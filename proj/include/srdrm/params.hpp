#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srdrm/ops.hpp"
#include "srdrm/random.hpp"

namespace srdrm {

// Named view of one parameter tensor inside a model. T may be const.
template <typename T>
struct ParamView {
  std::string name;
  std::vector<std::size_t> dims;
  std::span<T> values;
};

template <typename T>
std::size_t total_size(const std::vector<ParamView<T>>& views) {
  std::size_t n = 0;
  for (const auto& v : views) n += v.values.size();
  return n;
}

// He-style fan-in uniform init: U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)) for
// weights, zero bias. fan_in = in_channels * kH * kW.
template <typename T>
ConvParams<T> make_conv(std::size_t out_channels, std::size_t in_channels,
                        std::size_t kernel, int stride, Padding padding,
                        Rng& rng) {
  ConvParams<T> p;
  p.weights = Tensor4<T>({out_channels, in_channels, kernel, kernel});
  p.bias.assign(out_channels, T{});
  p.stride = stride;
  p.padding = padding;
  const double fan_in = static_cast<double>(in_channels * kernel * kernel);
  const double bound = std::sqrt(6.0 / fan_in);
  for (T& w : p.weights.values()) w = static_cast<T>(rng.uniform(-bound, bound));
  return p;
}

// Zero tensors of the same structure (used as gradient accumulators).
template <typename T>
ConvParams<T> zeros_like(const ConvParams<T>& p) {
  ConvParams<T> z = p;
  z.weights.fill(T{});
  std::fill(z.bias.begin(), z.bias.end(), T{});
  return z;
}

template <typename T>
BnParams<T> zeros_like(const BnParams<T>& p) {
  BnParams<T> z = p;
  std::fill(z.gamma.begin(), z.gamma.end(), T{});
  std::fill(z.beta.begin(), z.beta.end(), T{});
  return z;
}

template <typename T, typename U>
ConvParams<U> cast_conv(const ConvParams<T>& p) {
  ConvParams<U> q;
  q.weights = p.weights.template cast<U>();
  q.bias.assign(p.bias.begin(), p.bias.end());
  q.stride = p.stride;
  q.padding = p.padding;
  return q;
}

template <typename T, typename U>
BnParams<U> cast_bn(const BnParams<T>& p) {
  BnParams<U> q;
  q.gamma.assign(p.gamma.begin(), p.gamma.end());
  q.beta.assign(p.beta.begin(), p.beta.end());
  q.running_mean.assign(p.running_mean.begin(), p.running_mean.end());
  q.running_var.assign(p.running_var.begin(), p.running_var.end());
  q.momentum = p.momentum;
  q.epsilon = p.epsilon;
  return q;
}

template <typename Conv, typename T>
void append_conv_views(std::vector<ParamView<T>>& out, const std::string& name,
                       Conv& conv) {
  const Shape4& s = conv.weights.shape();
  out.push_back({name + ".weight", {s.n, s.c, s.h, s.w}, conv.weights.values()});
  out.push_back({name + ".bias", {conv.bias.size()}, std::span<T>(conv.bias)});
}

template <typename Bn, typename T>
void append_bn_views(std::vector<ParamView<T>>& out, const std::string& name,
                     Bn& bn) {
  out.push_back({name + ".gamma", {bn.gamma.size()}, std::span<T>(bn.gamma)});
  out.push_back({name + ".beta", {bn.beta.size()}, std::span<T>(bn.beta)});
}

template <typename Bn, typename T>
void append_bn_buffers(std::vector<ParamView<T>>& out, const std::string& name,
                       Bn& bn) {
  out.push_back({name + ".running_mean", {bn.running_mean.size()},
                 std::span<T>(bn.running_mean)});
  out.push_back({name + ".running_var", {bn.running_var.size()},
                 std::span<T>(bn.running_var)});
}

}  // namespace srdrm
