#pragma once

#include "srdrm/feature_extractor.hpp"
#include "srdrm/tensor.hpp"

namespace srdrm {

// Weights of the combined generator objective
//   total = content * L_C + perceptual * L_P + l2 * L_2 [+ adversarial * L_adv]
struct LossWeights {
  double content = 1e-2;
  double perceptual = 1e-3;
  double l2 = 1.0;
  double adversarial = 1e-3;

  void validate() const;  // ContractError on negative or non-finite weights
  bool operator==(const LossWeights&) const = default;
};

// A scalar loss and its gradient w.r.t. the generated tensor.
template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor4<T> gradient;
};

// Mean over the batch of the per-image L2 norm sqrt(sum (generated - target)^2).
template <typename T>
LossResult<T> global_similarity_loss(const Tensor4<T>& generated,
                                     const Tensor4<T>& target);

// Redmean color disparity. Both images are mapped from [-1, 1] to [0, 1];
// per pixel, with r, g, b the channel differences and rbar the mean of the
// two red values on the 0..255 scale,
//   s = (512 + rbar) r^2 + 4 g^2 + (767 - rbar) b^2.
// Per image the loss is sqrt(mean over pixels of s^2); the batch mean is
// returned.
template <typename T>
LossResult<T> perceptual_redmean_loss(const Tensor4<T>& generated,
                                      const Tensor4<T>& target);

// Per-pixel redmean disparity s for a single pair of [0, 1] RGB values.
double redmean_disparity(double gen_r, double gen_g, double gen_b,
                         double tgt_r, double tgt_g, double tgt_b);

// Mean over the batch of ||Phi(target) - Phi(generated)||_2. The gradient
// flows through `generated` only. `target_features`, when given, must equal
// Phi(target) and replaces its evaluation.
template <typename T>
LossResult<T> content_loss(const FeatureExtractor<T>& extractor,
                           const Tensor4<T>& generated,
                           const Tensor4<T>& target,
                           const Tensor4<T>* target_features = nullptr);

template <typename T>
struct GeneratorLoss {
  double content = 0.0;
  double perceptual = 0.0;
  double l2 = 0.0;
  double adversarial = 0.0;  // mean over patches of -log D(X, G(X))
  double total = 0.0;
  Tensor4<T> d_generated;
  Tensor4<T> d_validity;  // empty unless a validity map was given
};

// Pass `validity` (the discriminator map of the fake pair) in adversarial
// mode; the adversarial term and its gradient w.r.t. the map are added.
template <typename T>
GeneratorLoss<T> generator_total_loss(const LossWeights& weights,
                                      const FeatureExtractor<T>& extractor,
                                      const Tensor4<T>& generated,
                                      const Tensor4<T>& target,
                                      const Tensor4<T>* validity = nullptr,
                                      const Tensor4<T>* target_features = nullptr);

template <typename T>
struct AdversarialLoss {
  double d_loss = 0.0;      // -mean log D(real) - mean log(1 - D(fake))
  double g_adv_loss = 0.0;  // -mean log D(fake)
  Tensor4<T> d_loss_d_real;
  Tensor4<T> d_loss_d_fake;
  Tensor4<T> g_adv_d_fake;
};

inline constexpr double kLogClamp = 1e-12;

// Maps must hold values in [0, 1]; logs are clamped below at 1e-12 (where
// the clamp is active the gradient is zero).
template <typename T>
AdversarialLoss<T> adversarial_pair_loss(const Tensor4<T>& real_map,
                                         const Tensor4<T>& fake_map);

}  // namespace srdrm
