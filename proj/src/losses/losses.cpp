#include "srdrm/losses.hpp"

#include <cmath>

#include <fmt/format.h>

#include "srdrm/errors.hpp"

namespace srdrm {

namespace {

// Shared by the global similarity and content terms: batch mean of per-image
// L2 norms of (a - b), with gradient w.r.t. a.
template <typename T>
LossResult<T> batch_l2_norm(const Tensor4<T>& a, const Tensor4<T>& b) {
  const Shape4& s = a.shape();
  LossResult<T> r;
  r.gradient = Tensor4<T>(s);
  if (s.n == 0) return r;
  const std::size_t per_image = s.c * s.plane();
  const double inv_n = 1.0 / static_cast<double>(s.n);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* pa = a.plane(n, 0);
    const T* pb = b.plane(n, 0);
    double sum = 0.0;
    for (std::size_t i = 0; i < per_image; ++i) {
      const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
      sum += d * d;
    }
    const double norm = std::sqrt(sum);
    r.value += norm * inv_n;
    if (norm > 0.0) {
      T* g = r.gradient.plane(n, 0);
      const double scale = inv_n / norm;
      for (std::size_t i = 0; i < per_image; ++i) {
        g[i] = static_cast<T>((static_cast<double>(pa[i]) - static_cast<double>(pb[i])) * scale);
      }
    }
  }
  return r;
}

void require_rgb(const Shape4& s, const char* what) {
  if (s.c != 3) {
    throw ContractError(fmt::format("{}: expected 3 channels, got {}", what, s.to_string()));
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {content, perceptual, l2, adversarial}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ContractError(fmt::format(
          "loss weights must be finite and >= 0 (content={}, perceptual={}, l2={}, adversarial={})",
          content, perceptual, l2, adversarial));
    }
  }
}

double redmean_disparity(double gen_r, double gen_g, double gen_b,
                         double tgt_r, double tgt_g, double tgt_b) {
  const double r = gen_r - tgt_r;
  const double g = gen_g - tgt_g;
  const double b = gen_b - tgt_b;
  const double rbar = 255.0 * 0.5 * (gen_r + tgt_r);
  return (512.0 + rbar) * r * r + 4.0 * g * g + (767.0 - rbar) * b * b;
}

template <typename T>
LossResult<T> global_similarity_loss(const Tensor4<T>& generated,
                                     const Tensor4<T>& target) {
  require_same_shape(generated.shape(), target.shape(), "global_similarity_loss");
  return batch_l2_norm(generated, target);
}

template <typename T>
LossResult<T> perceptual_redmean_loss(const Tensor4<T>& generated,
                                      const Tensor4<T>& target) {
  require_same_shape(generated.shape(), target.shape(), "perceptual_redmean_loss");
  require_rgb(generated.shape(), "perceptual_redmean_loss");
  const Shape4& s = generated.shape();
  LossResult<T> r;
  r.gradient = Tensor4<T>(s);
  if (s.n == 0 || s.plane() == 0) return r;
  const std::size_t pixels = s.plane();
  const double inv_n = 1.0 / static_cast<double>(s.n);
  std::vector<double> disparity(pixels);

  for (std::size_t n = 0; n < s.n; ++n) {
    const T* gr = generated.plane(n, 0);
    const T* gg = generated.plane(n, 1);
    const T* gb = generated.plane(n, 2);
    const T* tr = target.plane(n, 0);
    const T* tg = target.plane(n, 1);
    const T* tb = target.plane(n, 2);
    auto unit = [](T v) { return 0.5 * (static_cast<double>(v) + 1.0); };

    double sum_sq = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      disparity[p] = redmean_disparity(unit(gr[p]), unit(gg[p]), unit(gb[p]),
                                       unit(tr[p]), unit(tg[p]), unit(tb[p]));
      sum_sq += disparity[p] * disparity[p];
    }
    const double rms = std::sqrt(sum_sq / static_cast<double>(pixels));
    r.value += rms * inv_n;
    if (rms == 0.0) continue;

    // d(rms)/d(s_p) = s_p / (P * rms); the [-1,1] -> [0,1] map contributes 0.5.
    const double outer = inv_n / (static_cast<double>(pixels) * rms) * 0.5;
    T* dr = r.gradient.plane(n, 0);
    T* dg = r.gradient.plane(n, 1);
    T* db = r.gradient.plane(n, 2);
    for (std::size_t p = 0; p < pixels; ++p) {
      const double ur = unit(gr[p]), vr = unit(tr[p]);
      const double dred = ur - vr;
      const double dgreen = unit(gg[p]) - unit(tg[p]);
      const double dblue = unit(gb[p]) - unit(tb[p]);
      const double rbar = 127.5 * (ur + vr);
      const double ds_dr = 127.5 * dred * dred + 2.0 * (512.0 + rbar) * dred -
                           127.5 * dblue * dblue;
      const double ds_dg = 8.0 * dgreen;
      const double ds_db = 2.0 * (767.0 - rbar) * dblue;
      const double k = outer * disparity[p];
      dr[p] = static_cast<T>(k * ds_dr);
      dg[p] = static_cast<T>(k * ds_dg);
      db[p] = static_cast<T>(k * ds_db);
    }
  }
  return r;
}

template <typename T>
LossResult<T> content_loss(const FeatureExtractor<T>& extractor,
                           const Tensor4<T>& generated,
                           const Tensor4<T>& target,
                           const Tensor4<T>* target_features) {
  require_same_shape(generated.shape(), target.shape(), "content_loss");
  if (extractor.is_identity()) return batch_l2_norm(generated, target);
  const ExtractorPass<T> gen_pass = extractor.forward_pass(generated);
  const Tensor4<T> computed = target_features ? Tensor4<T>() : extractor.forward(target);
  const Tensor4<T>& phi_target = target_features ? *target_features : computed;
  require_same_shape(phi_target.shape(), gen_pass.output.shape(), "content_loss target features");
  LossResult<T> feature_loss = batch_l2_norm(gen_pass.output, phi_target);
  LossResult<T> r;
  r.value = feature_loss.value;
  r.gradient = extractor.backward_input(gen_pass, feature_loss.gradient);
  return r;
}

template <typename T>
GeneratorLoss<T> generator_total_loss(const LossWeights& weights,
                                      const FeatureExtractor<T>& extractor,
                                      const Tensor4<T>& generated,
                                      const Tensor4<T>& target,
                                      const Tensor4<T>* validity,
                                      const Tensor4<T>* target_features) {
  weights.validate();
  require_same_shape(generated.shape(), target.shape(), "generator_total_loss");

  const LossResult<T> lc = content_loss(extractor, generated, target, target_features);
  const LossResult<T> lp = perceptual_redmean_loss(generated, target);
  const LossResult<T> l2 = global_similarity_loss(generated, target);

  GeneratorLoss<T> out;
  out.content = lc.value;
  out.perceptual = lp.value;
  out.l2 = l2.value;
  out.total = weights.content * lc.value + weights.perceptual * lp.value +
              weights.l2 * l2.value;

  out.d_generated = Tensor4<T>(generated.shape());
  T* d = out.d_generated.data();
  const T* gc = lc.gradient.data();
  const T* gp = lp.gradient.data();
  const T* g2 = l2.gradient.data();
  for (std::size_t i = 0; i < out.d_generated.size(); ++i) {
    d[i] = static_cast<T>(weights.content * gc[i] + weights.perceptual * gp[i] +
                          weights.l2 * g2[i]);
  }

  if (validity != nullptr) {
    const std::size_t count = validity->size();
    out.d_validity = Tensor4<T>(validity->shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double v = validity->data()[i];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ContractError(fmt::format("validity map value {} outside [0, 1]", v));
      }
      sum -= std::log(std::max(v, kLogClamp));
      out.d_validity.data()[i] = v > kLogClamp
          ? static_cast<T>(-weights.adversarial / (static_cast<double>(count) * v))
          : T(0);
    }
    out.adversarial = count > 0 ? sum / static_cast<double>(count) : 0.0;
    out.total += weights.adversarial * out.adversarial;
  }
  return out;
}

template <typename T>
AdversarialLoss<T> adversarial_pair_loss(const Tensor4<T>& real_map,
                                         const Tensor4<T>& fake_map) {
  AdversarialLoss<T> out;
  out.d_loss_d_real = Tensor4<T>(real_map.shape());
  out.d_loss_d_fake = Tensor4<T>(fake_map.shape());
  out.g_adv_d_fake = Tensor4<T>(fake_map.shape());
  for (const Tensor4<T>* map : {&real_map, &fake_map}) {
    for (T v : map->values()) {
      if (!(v >= T(0) && v <= T(1))) {
        throw ContractError(fmt::format("discriminator map value {} outside [0, 1]",
                                        static_cast<double>(v)));
      }
    }
  }
  const double nr = static_cast<double>(real_map.size());
  const double nf = static_cast<double>(fake_map.size());
  double real_term = 0.0;
  for (std::size_t i = 0; i < real_map.size(); ++i) {
    const double v = real_map.data()[i];
    real_term -= std::log(std::max(v, kLogClamp));
    out.d_loss_d_real.data()[i] = v > kLogClamp ? static_cast<T>(-1.0 / (nr * v)) : T(0);
  }
  double fake_term = 0.0;
  double g_term = 0.0;
  for (std::size_t i = 0; i < fake_map.size(); ++i) {
    const double v = fake_map.data()[i];
    const double one_minus = 1.0 - v;
    fake_term -= std::log(std::max(one_minus, kLogClamp));
    out.d_loss_d_fake.data()[i] =
        one_minus > kLogClamp ? static_cast<T>(1.0 / (nf * one_minus)) : T(0);
    g_term -= std::log(std::max(v, kLogClamp));
    out.g_adv_d_fake.data()[i] = v > kLogClamp ? static_cast<T>(-1.0 / (nf * v)) : T(0);
  }
  out.d_loss = (nr > 0 ? real_term / nr : 0.0) + (nf > 0 ? fake_term / nf : 0.0);
  out.g_adv_loss = nf > 0 ? g_term / nf : 0.0;
  return out;
}

#define SRDRM_INSTANTIATE(T)                                                     \
  template LossResult<T> global_similarity_loss(const Tensor4<T>&,              \
                                                const Tensor4<T>&);             \
  template LossResult<T> perceptual_redmean_loss(const Tensor4<T>&,             \
                                                 const Tensor4<T>&);            \
  template LossResult<T> content_loss(const FeatureExtractor<T>&,               \
                                      const Tensor4<T>&, const Tensor4<T>&,     \
                                      const Tensor4<T>*);                       \
  template GeneratorLoss<T> generator_total_loss(                                \
      const LossWeights&, const FeatureExtractor<T>&, const Tensor4<T>&,         \
      const Tensor4<T>&, const Tensor4<T>*, const Tensor4<T>*);                  \
  template AdversarialLoss<T> adversarial_pair_loss(const Tensor4<T>&,          \
                                                    const Tensor4<T>&);

SRDRM_INSTANTIATE(float)
SRDRM_INSTANTIATE(double)

#undef SRDRM_INSTANTIATE

}  // namespace srdrm
