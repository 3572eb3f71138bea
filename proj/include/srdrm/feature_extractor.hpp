#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "srdrm/ops.hpp"
#include "srdrm/tensor.hpp"

namespace srdrm {

template <typename T>
struct ExtractorLayer {
  ConvParams<T> conv;
  bool relu = true;
};

template <typename T>
struct ExtractorPass {
  std::vector<Tensor4<T>> inputs;
  std::vector<Tensor4<T>> conv_out;
  Tensor4<T> output;
};

// Fixed convolutional feature map used by the content loss. Its parameters
// are never exposed to an optimizer; only input gradients are computed.
template <typename T>
class FeatureExtractor {
 public:
  explicit FeatureExtractor(std::vector<ExtractorLayer<T>> layers);

  // Phi(x) = x; the content loss then equals the global similarity loss.
  static FeatureExtractor identity() { return FeatureExtractor({}); }

  bool is_identity() const { return layers_.empty(); }
  const std::vector<ExtractorLayer<T>>& layers() const { return layers_; }
  // 0 for the identity extractor (accepts any channel count).
  std::size_t in_channels() const;

  Tensor4<T> forward(const Tensor4<T>& x) const;
  ExtractorPass<T> forward_pass(const Tensor4<T>& x) const;
  Tensor4<T> backward_input(const ExtractorPass<T>& pass,
                            const Tensor4<T>& d_output) const;

  template <typename U>
  FeatureExtractor<U> cast() const {
    std::vector<ExtractorLayer<U>> layers;
    for (const auto& l : layers_) {
      ExtractorLayer<U> c;
      c.conv.weights = l.conv.weights.template cast<U>();
      c.conv.bias.assign(l.conv.bias.begin(), l.conv.bias.end());
      c.conv.stride = l.conv.stride;
      c.conv.padding = l.conv.padding;
      c.relu = l.relu;
      layers.push_back(std::move(c));
    }
    return FeatureExtractor<U>(std::move(layers));
  }

 private:
  std::vector<ExtractorLayer<T>> layers_;
};

inline constexpr std::uint64_t kDefaultExtractorSeed = 0x5EEDF00DULL;

// Where extractor weights come from: the built-in seeded stack, or an
// external manifest naming a checkpoint and its layer sequence.
struct ExtractorSource {
  std::optional<std::filesystem::path> manifest;
  std::uint64_t seed = kDefaultExtractorSeed;
};

// Default: five 3x3 conv + ReLU stages with 32 channels; stages 3 and 5 use
// stride 2, so a 32x32 input yields an 8x8 feature map.
FeatureExtractor<float> build_feature_extractor(const ExtractorSource& source = {});

// Manifest format (whitespace separated, '#' starts a comment):
//
//   srdrm-extractor 1
//   checkpoint <path relative to the manifest>
//   conv <entry-name> <stride> <padding> <relu|linear>
//   ...
//
// Each conv line reads <entry-name>.weight (out, in, k, k) and
// <entry-name>.bias from the checkpoint. Throws FormatError when malformed.
FeatureExtractor<float> load_feature_extractor(const std::filesystem::path& manifest);

extern template class FeatureExtractor<float>;
extern template class FeatureExtractor<double>;

}  // namespace srdrm
