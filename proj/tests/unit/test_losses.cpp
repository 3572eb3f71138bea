#include <doctest.h>

#include <cmath>

#include "grad_suite.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/feature_extractor.hpp"
#include "srdrm/losses.hpp"
#include "test_support.hpp"

using namespace srdrm;
using namespace srdrm::testing;

namespace {

// One pixel as a (1, 3, 1, 1) tensor from [0, 1] RGB.
Tensor4<double> pixel(double r, double g, double b) {
  return Tensor4<double>({1, 3, 1, 1}, {2 * r - 1, 2 * g - 1, 2 * b - 1});
}

}  // namespace

TEST_CASE("redmean hand-evaluated pixels") {
  // Pure red vs black: r = 1, rbar = 127.5 -> (512 + 127.5) * 1.
  CHECK(redmean_disparity(1, 0, 0, 0, 0, 0) == 639.5);
  // Pure blue vs black: rbar = 0 -> 767.
  CHECK(redmean_disparity(0, 0, 1, 0, 0, 0) == 767.0);
  CHECK(redmean_disparity(0, 1, 0, 0, 0, 0) == 4.0);
  // Single pixel loss is sqrt(s^2) = s.
  CHECK(perceptual_redmean_loss(pixel(1, 0, 0), pixel(0, 0, 0)).value == 639.5);
  CHECK(perceptual_redmean_loss(pixel(0, 0, 1), pixel(0, 0, 0)).value == 767.0);
}

TEST_CASE("losses vanish at identity") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Tensor4<double> x = random_tensor<double>({1, 3, 4 + rng.below(5), 4 + rng.below(5)}, rng);
    CHECK(perceptual_redmean_loss(x, x).value == 0.0);
    CHECK(global_similarity_loss(x, x).value == 0.0);
  }
}

TEST_CASE("global similarity is the batch mean of per-image norms") {
  Tensor4<double> a({2, 3, 1, 2}, 0.0);
  Tensor4<double> b({2, 3, 1, 2}, 0.0);
  b(0, 0, 0, 0) = 3.0;
  b(0, 1, 0, 1) = 4.0;  // image 0 norm 5
  b(1, 2, 0, 0) = 1.0;  // image 1 norm 1
  CHECK(global_similarity_loss(a, b).value == doctest::Approx(3.0));
  CHECK_THROWS_AS(global_similarity_loss(a, Tensor4<double>({2, 3, 2, 2})), ContractError);
}

TEST_CASE("loss gradients match finite differences") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    CAPTURE(seed);
    CHECK(l2_loss_grad_error(seed) <= kLossTolerance);
    CHECK(redmean_loss_grad_error(seed) <= kLossTolerance);
    CHECK(content_loss_grad_error(seed) <= kLossTolerance);
    CHECK(adversarial_loss_grad_error(seed) <= kLossTolerance);
  }
}

TEST_CASE("default feature extractor geometry") {
  const FeatureExtractor<float> fx = build_feature_extractor();
  CHECK(fx.layers().size() == 5);
  CHECK(fx.in_channels() == 3);
  const Tensor4<float> y = fx.forward(Tensor4<float>({1, 3, 32, 32}, 0.1f));
  CHECK(y.shape() == Shape4{1, 32, 8, 8});
  // Seeded: two builds agree exactly.
  const FeatureExtractor<float> again = build_feature_extractor();
  for (std::size_t i = 0; i < fx.layers().size(); ++i) {
    const auto a = fx.layers()[i].conv.weights.values();
    const auto b = again.layers()[i].conv.weights.values();
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("content loss with precomputed target features") {
  Rng rng(9);
  const FeatureExtractor<float> fx = build_feature_extractor();
  const Tensor4<float> g = random_tensor<float>({2, 3, 16, 12}, rng);
  const Tensor4<float> t = random_tensor<float>({2, 3, 16, 12}, rng);
  const Tensor4<float> phi = fx.forward(t);
  const LossResult<float> a = content_loss(fx, g, t);
  const LossResult<float> b = content_loss(fx, g, t, &phi);
  CHECK(a.value == b.value);
  for (std::size_t i = 0; i < a.gradient.size(); ++i) CHECK(a.gradient.data()[i] == b.gradient.data()[i]);
  const Tensor4<float> wrong({2, 32, 3, 3});
  CHECK_THROWS_AS(content_loss(fx, g, t, &wrong), ContractError);
}

TEST_CASE("identity extractor makes content loss equal L2") {
  Rng rng(8);
  const Tensor4<double> a = random_tensor<double>({2, 3, 5, 5}, rng);
  const Tensor4<double> b = random_tensor<double>({2, 3, 5, 5}, rng);
  const auto id = FeatureExtractor<double>::identity();
  CHECK(content_loss(id, a, b).value == doctest::Approx(global_similarity_loss(a, b).value));
}

TEST_CASE("adversarial loss values and clamping") {
  const Tensor4<double> real({1, 1, 1, 2}, {0.5, 0.5});
  const Tensor4<double> fake({1, 1, 1, 2}, {0.5, 0.5});
  const AdversarialLoss<double> a = adversarial_pair_loss(real, fake);
  CHECK(a.d_loss == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(a.g_adv_loss == doctest::Approx(std::log(2.0)));

  const Tensor4<double> zeros({1, 1, 1, 2}, 0.0);
  const AdversarialLoss<double> c = adversarial_pair_loss(zeros, zeros);
  CHECK(std::isfinite(c.d_loss));
  CHECK(c.d_loss == doctest::Approx(-std::log(kLogClamp)));
  CHECK(c.d_loss_d_real.data()[0] == 0.0);
  CHECK_THROWS_AS(adversarial_pair_loss(Tensor4<double>({1, 1, 1, 2}, 1.5), zeros), ContractError);
}

TEST_CASE("total loss combines weighted terms") {
  Rng rng(2);
  const Tensor4<double> g = random_tensor<double>({1, 3, 8, 8}, rng);
  const Tensor4<double> t = random_tensor<double>({1, 3, 8, 8}, rng);
  const FeatureExtractor<double>& fx = default_extractor_double();
  const LossWeights w;
  const Tensor4<double> v({1, 1, 1, 1}, 0.25);
  const GeneratorLoss<double> l = generator_total_loss(w, fx, g, t, &v);
  CHECK(l.content == doctest::Approx(content_loss(fx, g, t).value));
  CHECK(l.perceptual == doctest::Approx(perceptual_redmean_loss(g, t).value));
  CHECK(l.l2 == doctest::Approx(global_similarity_loss(g, t).value));
  CHECK(l.adversarial == doctest::Approx(-std::log(0.25)));
  CHECK(l.total == doctest::Approx(1e-2 * l.content + 1e-3 * l.perceptual + l.l2 +
                                   1e-3 * l.adversarial));
  LossWeights neg;
  neg.l2 = -1;
  CHECK_THROWS_AS(neg.validate(), ContractError);
}
