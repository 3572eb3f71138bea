#include "srdrm/feature_extractor.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "srdrm/checkpoint.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/params.hpp"
#include "srdrm/random.hpp"

namespace srdrm {

namespace {
constexpr std::size_t kDefaultWidth = 32;
constexpr int kDefaultStages = 5;
}  // namespace

template <typename T>
FeatureExtractor<T>::FeatureExtractor(std::vector<ExtractorLayer<T>> layers)
    : layers_(std::move(layers)) {
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].conv.in_channels() != layers_[i - 1].conv.out_channels()) {
      throw FormatError(fmt::format(
          "feature extractor layer {} expects {} channels, previous layer emits {}",
          i, layers_[i].conv.in_channels(), layers_[i - 1].conv.out_channels()));
    }
  }
}

template <typename T>
std::size_t FeatureExtractor<T>::in_channels() const {
  return layers_.empty() ? 0 : layers_.front().conv.in_channels();
}

template <typename T>
Tensor4<T> FeatureExtractor<T>::forward(const Tensor4<T>& x) const {
  return forward_pass(x).output;
}

template <typename T>
ExtractorPass<T> FeatureExtractor<T>::forward_pass(const Tensor4<T>& x) const {
  if (!layers_.empty() && x.shape().c != in_channels()) {
    throw ContractError(fmt::format(
        "feature extractor expects {} input channels, got {}", in_channels(),
        x.shape().to_string()));
  }
  ExtractorPass<T> pass;
  Tensor4<T> cur = x;
  for (const auto& layer : layers_) {
    pass.inputs.push_back(cur);
    Tensor4<T> z = conv2d(cur, layer.conv);
    cur = layer.relu ? activate(z, Activation::relu()) : z;
    pass.conv_out.push_back(std::move(z));
  }
  pass.output = std::move(cur);
  return pass;
}

template <typename T>
Tensor4<T> FeatureExtractor<T>::backward_input(const ExtractorPass<T>& pass,
                                               const Tensor4<T>& d_output) const {
  require_same_shape(d_output.shape(), pass.output.shape(), "feature extractor backward");
  Tensor4<T> d = d_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    if (layer.relu) {
      const Tensor4<T>& act = i + 1 < layers_.size() ? pass.inputs[i + 1] : pass.output;
      d = activate_backward(pass.conv_out[i], act, Activation::relu(), d);
    }
    d = conv2d_backward_input(pass.inputs[i], layer.conv, d);
  }
  return d;
}

FeatureExtractor<float> build_feature_extractor(const ExtractorSource& source) {
  if (source.manifest) return load_feature_extractor(*source.manifest);
  Rng rng(source.seed);
  std::vector<ExtractorLayer<float>> layers;
  std::size_t in = 3;
  for (int stage = 1; stage <= kDefaultStages; ++stage) {
    const int stride = (stage == 3 || stage == 5) ? 2 : 1;
    ExtractorLayer<float> layer;
    layer.conv = make_conv<float>(kDefaultWidth, in, 3, stride, Padding::same(3), rng);
    layer.relu = true;
    layers.push_back(std::move(layer));
    in = kDefaultWidth;
  }
  return FeatureExtractor<float>(std::move(layers));
}

FeatureExtractor<float> load_feature_extractor(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError(fmt::format("cannot open extractor manifest '{}'", manifest.string()));

  std::optional<Checkpoint> ckpt;
  std::vector<ExtractorLayer<float>> layers;
  bool header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string keyword;
    if (!(ss >> keyword)) continue;
    auto fail = [&](const std::string& why) {
      return FormatError(fmt::format("{}:{}: {}", manifest.string(), line_no, why));
    };
    if (!header) {
      int version = 0;
      if (keyword != "srdrm-extractor" || !(ss >> version) || version != 1) {
        throw fail("expected header 'srdrm-extractor 1'");
      }
      header = true;
    } else if (keyword == "checkpoint") {
      std::string rel;
      if (!(ss >> rel)) throw fail("checkpoint line needs a path");
      ckpt = read_checkpoint(manifest.parent_path() / rel);
    } else if (keyword == "conv") {
      std::string name, act;
      int stride = 0, pad = -1;
      if (!(ss >> name >> stride >> pad >> act) || stride < 1 || pad < 0 ||
          (act != "relu" && act != "linear")) {
        throw fail("expected 'conv <name> <stride> <padding> <relu|linear>'");
      }
      if (!ckpt) throw fail("conv line before checkpoint line");
      const CheckpointEntry* w = ckpt->find(name + ".weight");
      const CheckpointEntry* b = ckpt->find(name + ".bias");
      if (w == nullptr || b == nullptr || w->dims.size() != 4 ||
          b->dims.size() != 1 || b->dims[0] != w->dims[0]) {
        throw fail(fmt::format("checkpoint lacks a usable '{}.weight'/'{}.bias' pair", name, name));
      }
      ExtractorLayer<float> layer;
      layer.conv.weights = Tensor4<float>({w->dims[0], w->dims[1], w->dims[2], w->dims[3]}, w->values);
      layer.conv.bias = b->values;
      layer.conv.stride = stride;
      layer.conv.padding = Padding::symmetric(pad);
      layer.relu = act == "relu";
      layers.push_back(std::move(layer));
    } else {
      throw fail(fmt::format("unknown keyword '{}'", keyword));
    }
  }
  if (!header) throw FormatError(fmt::format("{}: empty extractor manifest", manifest.string()));
  if (layers.empty()) throw FormatError(fmt::format("{}: no conv layers", manifest.string()));
  return FeatureExtractor<float>(std::move(layers));
}

template class FeatureExtractor<float>;
template class FeatureExtractor<double>;

}  // namespace srdrm
