#include "srdrm/discriminator.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "srdrm/errors.hpp"

namespace srdrm {

namespace {
constexpr int kKernel = 3;
constexpr std::size_t kImageChannels = 3;
constexpr int kRequiredDownsample = 16;
}  // namespace

void DiscriminatorConfig::validate() const {
  if (layers < 2) {
    throw ConfigError(fmt::format("discriminator needs >= 2 layers, got {}", layers));
  }
  if (stride_layout.size() != static_cast<std::size_t>(layers)) {
    throw ConfigError(fmt::format("stride_layout has {} entries for {} layers",
                                  stride_layout.size(), layers));
  }
  for (int s : stride_layout) {
    if (s != 1 && s != 2) {
      throw ConfigError(fmt::format("discriminator strides must be 1 or 2, got {}", s));
    }
  }
  if (downsample_factor() != kRequiredDownsample) {
    throw ConfigError(fmt::format(
        "discriminator stride product must be {} (640x480 -> 40x30), got {}",
        kRequiredDownsample, downsample_factor()));
  }
  if (base_filters < 1 || max_filters < base_filters) {
    throw ConfigError(fmt::format("invalid discriminator widths base={} max={}",
                                  base_filters, max_filters));
  }
}

int DiscriminatorConfig::downsample_factor() const {
  int f = 1;
  for (int s : stride_layout) f *= s;
  return f;
}

int DiscriminatorConfig::filters_at(int layer) const {
  int width = base_filters;
  for (int i = 0; i < layer; ++i) {
    if (stride_layout[static_cast<std::size_t>(i)] == 2) {
      width = std::min(width * 2, max_filters);
    }
  }
  return width;
}

DiscriminatorConfig DiscriminatorConfig::tiny() {
  DiscriminatorConfig c;
  c.base_filters = 8;
  c.max_filters = 32;
  return c;
}

template <typename T>
Discriminator<T>::Discriminator(DiscriminatorConfig config,
                                std::vector<DiscriminatorLayer<T>> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  config_.validate();
  if (layers_.size() != static_cast<std::size_t>(config_.layers)) {
    throw ConfigError("discriminator layer list does not match its config");
  }
}

template <typename T>
Discriminator<T> build_discriminator(const DiscriminatorConfig& config,
                                     std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<DiscriminatorLayer<T>> layers;
  std::size_t in = 2 * kImageChannels;
  for (int i = 0; i < config.layers; ++i) {
    const bool last = i == config.layers - 1;
    const std::size_t out = last ? 1 : static_cast<std::size_t>(config.filters_at(i));
    DiscriminatorLayer<T> layer;
    layer.conv = make_conv<T>(out, in, kKernel,
                              config.stride_layout[static_cast<std::size_t>(i)],
                              Padding::same(kKernel), rng);
    if (!last) layer.bn = BnParams<T>::identity(out);
    layers.push_back(std::move(layer));
    in = out;
  }
  return Discriminator<T>(config, std::move(layers));
}

template <typename T>
Tensor4<T> Discriminator<T>::forward(const Tensor4<T>& candidate,
                                     const Tensor4<T>& condition,
                                     BnMode mode) const {
  return forward_pass(candidate, condition, mode).output;
}

template <typename T>
DiscriminatorPass<T> Discriminator<T>::forward_pass(const Tensor4<T>& candidate,
                                                    const Tensor4<T>& condition,
                                                    BnMode mode) const {
  if (candidate.shape().c != kImageChannels || condition.shape().c != kImageChannels) {
    throw ContractError(fmt::format(
        "discriminator inputs must be 3-channel, got candidate {} condition {}",
        candidate.shape().to_string(), condition.shape().to_string()));
  }
  require_same_shape(candidate.shape(), condition.shape(),
                     "discriminator candidate/condition");

  DiscriminatorPass<T> pass;
  Tensor4<T> x = concat_channels(condition, candidate);
  const Activation leaky = Activation::leaky_relu(config_.leaky_slope);
  for (const DiscriminatorLayer<T>& layer : layers_) {
    DiscriminatorLayerPass<T> lp;
    lp.input = std::move(x);
    lp.conv_out = conv2d(lp.input, layer.conv);
    if (layer.bn) {
      lp.activated = activate(lp.conv_out, leaky);
      lp.bn = batchnorm(lp.activated, *layer.bn, mode);
      lp.output = lp.bn->output;
    } else {
      lp.activated = activate(lp.conv_out, Activation::sigmoid());
      lp.output = lp.activated;
    }
    x = lp.output;
    pass.layers.push_back(std::move(lp));
  }
  pass.output = std::move(x);
  return pass;
}

template <typename T>
DiscriminatorGradients<T> Discriminator<T>::backward(
    const DiscriminatorPass<T>& pass, const Tensor4<T>& d_output,
    bool need_candidate_grad) const {
  require_same_shape(d_output.shape(), pass.output.shape(), "discriminator backward");
  DiscriminatorGradients<T> grads{zeros_like(), {}};
  const Activation leaky = Activation::leaky_relu(config_.leaky_slope);

  Tensor4<T> d = d_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const DiscriminatorLayer<T>& layer = layers_[i];
    const DiscriminatorLayerPass<T>& lp = pass.layers[i];
    DiscriminatorLayer<T>& g = grads.params.layers_[i];
    if (layer.bn) {
      auto gb = batchnorm_backward(*lp.bn, *layer.bn, d);
      g.bn->gamma = std::move(gb.d_gamma);
      g.bn->beta = std::move(gb.d_beta);
      d = activate_backward(lp.conv_out, lp.activated, leaky, gb.d_input);
    } else {
      d = activate_backward(lp.conv_out, lp.activated, Activation::sigmoid(), d);
    }
    const bool need_input = i > 0 || need_candidate_grad;
    auto gc = conv2d_backward(lp.input, layer.conv, d, need_input);
    g.conv.weights = std::move(gc.d_weights);
    g.conv.bias = std::move(gc.d_bias);
    d = std::move(gc.d_input);
  }
  if (need_candidate_grad) {
    grads.d_candidate = slice_channels(d, kImageChannels, kImageChannels);
  }
  return grads;
}

template <typename T>
void Discriminator<T>::commit_running_stats(const DiscriminatorPass<T>& pass) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& bn = pass.layers[i].bn;
    if (layers_[i].bn && bn && bn->mode == BnMode::train) {
      layers_[i].bn->running_mean = bn->running_mean;
      layers_[i].bn->running_var = bn->running_var;
    }
  }
}

template <typename T>
template <typename Self, typename V>
void Discriminator<T>::collect(Self& self, std::vector<ParamView<V>>& out,
                               bool running_stats) {
  for (std::size_t i = 0; i < self.layers_.size(); ++i) {
    auto& layer = self.layers_[i];
    const std::string prefix = fmt::format("d.layer{}", i);
    if (running_stats) {
      if (layer.bn) append_bn_buffers(out, prefix + ".bn", *layer.bn);
    } else {
      append_conv_views(out, prefix + ".conv", layer.conv);
      if (layer.bn) append_bn_views(out, prefix + ".bn", *layer.bn);
    }
  }
}

template <typename T>
std::vector<ParamView<T>> Discriminator<T>::parameters() {
  std::vector<ParamView<T>> out;
  collect(*this, out, false);
  return out;
}

template <typename T>
std::vector<ParamView<const T>> Discriminator<T>::parameters() const {
  std::vector<ParamView<const T>> out;
  collect(*this, out, false);
  return out;
}

template <typename T>
std::vector<ParamView<T>> Discriminator<T>::buffers() {
  std::vector<ParamView<T>> out;
  collect(*this, out, true);
  return out;
}

template <typename T>
std::vector<ParamView<const T>> Discriminator<T>::buffers() const {
  std::vector<ParamView<const T>> out;
  collect(*this, out, true);
  return out;
}

template <typename T>
std::size_t Discriminator<T>::parameter_count() const {
  return total_size(parameters());
}

template <typename T>
Discriminator<T> Discriminator<T>::zeros_like() const {
  std::vector<DiscriminatorLayer<T>> layers;
  for (const auto& l : layers_) {
    DiscriminatorLayer<T> z;
    z.conv = srdrm::zeros_like(l.conv);
    if (l.bn) z.bn = srdrm::zeros_like(*l.bn);
    layers.push_back(std::move(z));
  }
  return Discriminator<T>(config_, std::move(layers));
}

template class Discriminator<float>;
template class Discriminator<double>;
template Discriminator<float> build_discriminator(const DiscriminatorConfig&, std::uint64_t);
template Discriminator<double> build_discriminator(const DiscriminatorConfig&, std::uint64_t);

}  // namespace srdrm
