#include "srdrm/generator.hpp"

#include <fmt/format.h>

#include "srdrm/errors.hpp"

namespace srdrm {

namespace {

constexpr int kHeadKernel = 4;
constexpr int kResidualKernel = 3;
constexpr int kUpsampleKernel = 4;
constexpr int kOutputKernel = 3;
constexpr std::size_t kImageChannels = 3;

template <typename T>
Tensor4<T> conv_bn(const Tensor4<T>& x, const ConvParams<T>& conv,
                   const std::optional<BnParams<T>>& bn, BnMode mode,
                   Tensor4<T>& conv_out, std::optional<BnResult<T>>& bn_out) {
  conv_out = conv2d(x, conv);
  if (!bn) return conv_out;
  bn_out = batchnorm(conv_out, *bn, mode);
  return bn_out->output;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (scale_exp < 1 || scale_exp > 3) {
    throw ConfigError(fmt::format("generator scale_exp must be 1, 2 or 3, got {}", scale_exp));
  }
  if (base_filters < 1) {
    throw ConfigError(fmt::format("generator base_filters must be >= 1, got {}", base_filters));
  }
  if (residual_layers < 1) {
    throw ConfigError(fmt::format("generator residual_layers must be >= 1, got {}", residual_layers));
  }
}

GeneratorConfig GeneratorConfig::tiny(int scale_exp) {
  GeneratorConfig c;
  c.scale_exp = scale_exp;
  c.base_filters = 16;
  c.residual_layers = 2;
  return c;
}

std::size_t generator_parameter_count(const GeneratorConfig& config) {
  config.validate();
  const std::size_t f = static_cast<std::size_t>(config.base_filters);
  const std::size_t r = static_cast<std::size_t>(config.residual_layers);
  const std::size_t k4 = kHeadKernel * kHeadKernel;
  const std::size_t k3 = kResidualKernel * kResidualKernel;
  std::size_t total = 0;
  for (int b = 0; b < config.scale_exp; ++b) {
    const std::size_t in = b == 0 ? kImageChannels : f;
    total += f * in * k4 + f;                     // head
    total += r * 2 * (f * f * k3 + f);            // residual convs
    if (config.use_bn_in_drm) total += r * 2 * 2 * f;  // gamma + beta
    total += 2 * (f * f * k4 + f);                // tail + upsample
  }
  total += kImageChannels * f * kOutputKernel * kOutputKernel + kImageChannels;
  return total;
}

template <typename T>
Generator<T>::Generator(GeneratorConfig config, std::vector<DrmBlock<T>> blocks,
                        ConvParams<T> output)
    : config_(config), blocks_(std::move(blocks)), output_(std::move(output)) {
  config_.validate();
  if (blocks_.size() != static_cast<std::size_t>(config_.scale_exp)) {
    throw ConfigError(fmt::format("generator has {} blocks but scale_exp {}",
                                  blocks_.size(), config_.scale_exp));
  }
}

template <typename T>
Generator<T> build_generator(const GeneratorConfig& config,
                             std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t f = static_cast<std::size_t>(config.base_filters);
  std::vector<DrmBlock<T>> blocks;
  for (int b = 0; b < config.scale_exp; ++b) {
    DrmBlock<T> block;
    const std::size_t in = b == 0 ? kImageChannels : f;
    block.head = make_conv<T>(f, in, kHeadKernel, 1, Padding::same(kHeadKernel), rng);
    for (int u = 0; u < config.residual_layers; ++u) {
      ResidualUnit<T> unit;
      unit.first = make_conv<T>(f, f, kResidualKernel, 1, Padding::same(kResidualKernel), rng);
      unit.second = make_conv<T>(f, f, kResidualKernel, 1, Padding::same(kResidualKernel), rng);
      if (config.use_bn_in_drm) {
        unit.first_bn = BnParams<T>::identity(f);
        unit.second_bn = BnParams<T>::identity(f);
      }
      block.units.push_back(std::move(unit));
    }
    block.tail = make_conv<T>(f, f, kHeadKernel, 1, Padding::same(kHeadKernel), rng);
    block.upsample = make_conv<T>(f, f, kUpsampleKernel, 2, Padding::symmetric(1), rng);
    blocks.push_back(std::move(block));
  }
  ConvParams<T> output = make_conv<T>(kImageChannels, f, kOutputKernel, 1,
                                      Padding::same(kOutputKernel), rng);
  return Generator<T>(config, std::move(blocks), std::move(output));
}

template <typename T>
Tensor4<T> Generator<T>::forward(const Tensor4<T>& x, BnMode mode) const {
  return forward_pass(x, mode).output;
}

template <typename T>
GeneratorPass<T> Generator<T>::forward_pass(const Tensor4<T>& x,
                                            BnMode mode) const {
  if (x.shape().c != kImageChannels) {
    throw ContractError(fmt::format(
        "generator input must have 3 channels, got shape {}", x.shape().to_string()));
  }
  if (x.shape().n == 0 || x.shape().h == 0 || x.shape().w == 0) {
    throw ContractError(fmt::format("generator input is empty: {}", x.shape().to_string()));
  }
  GeneratorPass<T> pass;
  Tensor4<T> current = x;
  for (const DrmBlock<T>& block : blocks_) {
    BlockPass<T> bp;
    bp.input = current;
    bp.head_out = conv2d(current, block.head);
    Tensor4<T> r = bp.head_out;
    for (const ResidualUnit<T>& unit : block.units) {
      UnitPass<T> up;
      up.input = r;
      Tensor4<T> a = conv_bn(r, unit.first, unit.first_bn, mode, up.first_out, up.first_bn);
      up.activated = activate(a, Activation::relu());
      Tensor4<T> b = conv_bn(up.activated, unit.second, unit.second_bn, mode,
                             up.second_out, up.second_bn);
      r += b;
      bp.units.push_back(std::move(up));
    }
    bp.residual_out = r;
    bp.tail_out = conv2d(r, block.tail);
    bp.upsampled = deconv2d(bp.tail_out, block.upsample);
    bp.output = activate(bp.upsampled, Activation::relu());
    current = bp.output;
    pass.blocks.push_back(std::move(bp));
  }
  pass.pre_tanh = conv2d(current, output_);
  pass.output = activate(pass.pre_tanh, Activation::tanh());
  return pass;
}

template <typename T>
Generator<T> Generator<T>::backward(const GeneratorPass<T>& pass,
                                    const Tensor4<T>& d_output) const {
  require_same_shape(d_output.shape(), pass.output.shape(), "generator backward");
  Generator<T> grads = zeros_like();

  Tensor4<T> d = activate_backward(pass.pre_tanh, pass.output, Activation::tanh(), d_output);
  {
    auto g = conv2d_backward(pass.blocks.back().output, output_, d);
    grads.output_.weights = std::move(g.d_weights);
    grads.output_.bias = std::move(g.d_bias);
    d = std::move(g.d_input);
  }

  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    const DrmBlock<T>& block = blocks_[bi];
    const BlockPass<T>& bp = pass.blocks[bi];
    DrmBlock<T>& gb = grads.blocks_[bi];

    d = activate_backward(bp.upsampled, bp.output, Activation::relu(), d);
    auto gu = deconv2d_backward(bp.tail_out, block.upsample, d);
    gb.upsample.weights = std::move(gu.d_weights);
    gb.upsample.bias = std::move(gu.d_bias);
    auto gt = conv2d_backward(bp.residual_out, block.tail, gu.d_input);
    gb.tail.weights = std::move(gt.d_weights);
    gb.tail.bias = std::move(gt.d_bias);
    d = std::move(gt.d_input);

    for (std::size_t ui = block.units.size(); ui-- > 0;) {
      const ResidualUnit<T>& unit = block.units[ui];
      const UnitPass<T>& up = pass.blocks[bi].units[ui];
      ResidualUnit<T>& gu_unit = gb.units[ui];

      Tensor4<T> d_branch = d;
      if (unit.second_bn) {
        auto g = batchnorm_backward(*up.second_bn, *unit.second_bn, d_branch);
        gu_unit.second_bn->gamma = std::move(g.d_gamma);
        gu_unit.second_bn->beta = std::move(g.d_beta);
        d_branch = std::move(g.d_input);
      }
      auto g2 = conv2d_backward(up.activated, unit.second, d_branch);
      gu_unit.second.weights = std::move(g2.d_weights);
      gu_unit.second.bias = std::move(g2.d_bias);

      const Tensor4<T>& pre_act = up.first_bn ? up.first_bn->output : up.first_out;
      d_branch = activate_backward(pre_act, up.activated, Activation::relu(), g2.d_input);
      if (unit.first_bn) {
        auto g = batchnorm_backward(*up.first_bn, *unit.first_bn, d_branch);
        gu_unit.first_bn->gamma = std::move(g.d_gamma);
        gu_unit.first_bn->beta = std::move(g.d_beta);
        d_branch = std::move(g.d_input);
      }
      auto g1 = conv2d_backward(up.input, unit.first, d_branch);
      gu_unit.first.weights = std::move(g1.d_weights);
      gu_unit.first.bias = std::move(g1.d_bias);
      d += g1.d_input;
    }

    auto gh = conv2d_backward(bp.input, block.head, d, /*need_input_grad=*/bi > 0);
    gb.head.weights = std::move(gh.d_weights);
    gb.head.bias = std::move(gh.d_bias);
    d = std::move(gh.d_input);
  }
  return grads;
}

template <typename T>
void Generator<T>::commit_running_stats(const GeneratorPass<T>& pass) {
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    for (std::size_t ui = 0; ui < blocks_[bi].units.size(); ++ui) {
      ResidualUnit<T>& unit = blocks_[bi].units[ui];
      const UnitPass<T>& up = pass.blocks[bi].units[ui];
      if (unit.first_bn && up.first_bn && up.first_bn->mode == BnMode::train) {
        unit.first_bn->running_mean = up.first_bn->running_mean;
        unit.first_bn->running_var = up.first_bn->running_var;
      }
      if (unit.second_bn && up.second_bn && up.second_bn->mode == BnMode::train) {
        unit.second_bn->running_mean = up.second_bn->running_mean;
        unit.second_bn->running_var = up.second_bn->running_var;
      }
    }
  }
}

template <typename T>
template <typename Self, typename V>
void Generator<T>::collect(Self& self, std::vector<ParamView<V>>& out,
                           bool running_stats) {
  for (std::size_t bi = 0; bi < self.blocks_.size(); ++bi) {
    auto& block = self.blocks_[bi];
    const std::string prefix = fmt::format("g.block{}", bi);
    if (!running_stats) append_conv_views(out, prefix + ".head", block.head);
    for (std::size_t ui = 0; ui < block.units.size(); ++ui) {
      auto& unit = block.units[ui];
      const std::string up = fmt::format("{}.unit{}", prefix, ui);
      if (!running_stats) {
        append_conv_views(out, up + ".first", unit.first);
        if (unit.first_bn) append_bn_views(out, up + ".first_bn", *unit.first_bn);
        append_conv_views(out, up + ".second", unit.second);
        if (unit.second_bn) append_bn_views(out, up + ".second_bn", *unit.second_bn);
      } else {
        if (unit.first_bn) append_bn_buffers(out, up + ".first_bn", *unit.first_bn);
        if (unit.second_bn) append_bn_buffers(out, up + ".second_bn", *unit.second_bn);
      }
    }
    if (!running_stats) {
      append_conv_views(out, prefix + ".tail", block.tail);
      append_conv_views(out, prefix + ".upsample", block.upsample);
    }
  }
  if (!running_stats) append_conv_views(out, "g.output", self.output_);
}

template <typename T>
std::vector<ParamView<T>> Generator<T>::parameters() {
  std::vector<ParamView<T>> out;
  collect(*this, out, false);
  return out;
}

template <typename T>
std::vector<ParamView<const T>> Generator<T>::parameters() const {
  std::vector<ParamView<const T>> out;
  collect(*this, out, false);
  return out;
}

template <typename T>
std::vector<ParamView<T>> Generator<T>::buffers() {
  std::vector<ParamView<T>> out;
  collect(*this, out, true);
  return out;
}

template <typename T>
std::vector<ParamView<const T>> Generator<T>::buffers() const {
  std::vector<ParamView<const T>> out;
  collect(*this, out, true);
  return out;
}

template <typename T>
std::size_t Generator<T>::parameter_count() const {
  return total_size(parameters());
}

template <typename T>
Generator<T> Generator<T>::zeros_like() const {
  std::vector<DrmBlock<T>> blocks;
  for (const DrmBlock<T>& b : blocks_) {
    DrmBlock<T> z;
    z.head = srdrm::zeros_like(b.head);
    for (const ResidualUnit<T>& u : b.units) {
      ResidualUnit<T> zu;
      zu.first = srdrm::zeros_like(u.first);
      zu.second = srdrm::zeros_like(u.second);
      if (u.first_bn) zu.first_bn = srdrm::zeros_like(*u.first_bn);
      if (u.second_bn) zu.second_bn = srdrm::zeros_like(*u.second_bn);
      z.units.push_back(std::move(zu));
    }
    z.tail = srdrm::zeros_like(b.tail);
    z.upsample = srdrm::zeros_like(b.upsample);
    blocks.push_back(std::move(z));
  }
  return Generator<T>(config_, std::move(blocks), srdrm::zeros_like(output_));
}

template <typename T>
template <typename U>
Generator<U> Generator<T>::cast() const {
  std::vector<DrmBlock<U>> blocks;
  for (const DrmBlock<T>& b : blocks_) {
    DrmBlock<U> c;
    c.head = cast_conv<T, U>(b.head);
    for (const ResidualUnit<T>& u : b.units) {
      ResidualUnit<U> cu;
      cu.first = cast_conv<T, U>(u.first);
      cu.second = cast_conv<T, U>(u.second);
      if (u.first_bn) cu.first_bn = cast_bn<T, U>(*u.first_bn);
      if (u.second_bn) cu.second_bn = cast_bn<T, U>(*u.second_bn);
      c.units.push_back(std::move(cu));
    }
    c.tail = cast_conv<T, U>(b.tail);
    c.upsample = cast_conv<T, U>(b.upsample);
    blocks.push_back(std::move(c));
  }
  return Generator<U>(config_, std::move(blocks), cast_conv<T, U>(output_));
}

template class Generator<float>;
template class Generator<double>;
template Generator<double> Generator<float>::cast<double>() const;
template Generator<float> Generator<double>::cast<float>() const;
template Generator<float> build_generator(const GeneratorConfig&, std::uint64_t);
template Generator<double> build_generator(const GeneratorConfig&, std::uint64_t);

}  // namespace srdrm
