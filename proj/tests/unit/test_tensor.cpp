#include <doctest.h>

#include <cmath>

#include "grad_suite.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/ops.hpp"
#include "srdrm/tensor.hpp"
#include "test_support.hpp"

using namespace srdrm;
using namespace srdrm::testing;

namespace {

double max_abs_diff(const Tensor4<double>& a, const Tensor4<double>& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("output extents") {
  CHECK(conv_output_extent(10, 3, 1, Padding::symmetric(1)) == 10);
  CHECK(conv_output_extent(10, 4, 1, Padding::same(4)) == 10);
  CHECK(conv_output_extent(10, 3, 2, Padding::symmetric(1)) == 5);
  CHECK(conv_output_extent(9, 3, 2, Padding::symmetric(1)) == 5);
  CHECK(deconv_output_extent(10, 4, 2, Padding::symmetric(1)) == 20);
  CHECK(Padding::same(4) == Padding{1, 2});
  CHECK_THROWS_AS(conv_output_extent(2, 5, 1, Padding::symmetric(0)), ConfigError);
}

TEST_CASE("conv2d and deconv2d agree with direct evaluation") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    for (const ConvCase& cc : conv_cases()) {
      Rng rng(seed * 31 + cc.kernel);
      const Tensor4<double> x = random_tensor<double>({2, 3, 5 + rng.below(6), 5 + rng.below(6)}, rng);
      ConvParams<double> p = make_conv<double>(4, 3, cc.kernel, cc.stride, cc.padding, rng);
      for (double& b : p.bias) b = rng.uniform(-1, 1);
      CHECK(max_abs_diff(conv2d(x, p), naive_conv2d(x, p)) < 1e-12);
      CHECK(max_abs_diff(deconv2d(x, p), naive_deconv2d(x, p)) < 1e-12);
    }
  }
}

TEST_CASE("conv2d rejects mismatched channels") {
  Rng rng(3);
  const Tensor4<float> x({1, 2, 6, 6});
  const ConvParams<float> p = make_conv<float>(4, 3, 3, 1, Padding::symmetric(1), rng);
  CHECK_THROWS_AS(conv2d(x, p), ContractError);
  CHECK_THROWS_AS(deconv2d(x, p), ContractError);
}

TEST_CASE("conv and deconv gradients match finite differences") {
  for (std::uint64_t seed = 100; seed < 104; ++seed) {
    for (const ConvCase& cc : conv_cases()) {
      CAPTURE(seed);
      CAPTURE(cc.kernel);
      CAPTURE(cc.stride);
      CHECK(conv_grad_error(seed, cc, false) <= kOpTolerance);
      CHECK(conv_grad_error(seed, cc, true) <= kOpTolerance);
    }
  }
}

TEST_CASE("conv2d_backward can skip the input gradient") {
  Rng rng(5);
  const Tensor4<float> x = random_tensor<float>({1, 2, 5, 5}, rng);
  const ConvParams<float> p = make_conv<float>(3, 2, 3, 1, Padding::symmetric(1), rng);
  const Tensor4<float> r = random_tensor<float>({1, 3, 5, 5}, rng);
  const ConvGradients<float> with = conv2d_backward(x, p, r, true);
  const ConvGradients<float> without = conv2d_backward(x, p, r, false);
  CHECK(without.d_input.empty());
  CHECK(with.d_weights.values().size() == without.d_weights.values().size());
  for (std::size_t i = 0; i < with.d_weights.size(); ++i) {
    CHECK(with.d_weights.data()[i] == without.d_weights.data()[i]);
  }
}

TEST_CASE("conv2d_backward_input equals the full backward's input gradient") {
  Rng rng(6);
  const Tensor4<float> x = random_tensor<float>({2, 3, 7, 6}, rng);
  const ConvParams<float> p = make_conv<float>(4, 3, 3, 2, Padding::symmetric(1), rng);
  const Tensor4<float> r = random_tensor<float>({2, 4, 4, 3}, rng);
  const Tensor4<float> d = conv2d_backward_input(x, p, r);
  const Tensor4<float> full = conv2d_backward(x, p, r).d_input;
  REQUIRE(d.shape() == x.shape());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.data()[i] == full.data()[i]);
}

TEST_CASE("batchnorm gradients match finite differences") {
  for (std::uint64_t seed = 200; seed < 208; ++seed) {
    CAPTURE(seed);
    CHECK(batchnorm_grad_error(seed) <= kOpTolerance);
  }
}

TEST_CASE("batchnorm normalizes in train mode and updates running stats") {
  Rng rng(9);
  const Tensor4<double> x = random_tensor<double>({4, 2, 3, 3}, rng, 1.0, 3.0);
  const BnParams<double> p = BnParams<double>::identity(2);
  const BnResult<double> r = batchnorm(x, p, BnMode::train);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0, sq = 0.0, xmean = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 9; ++i) {
        mean += r.output.plane(n, c)[i];
        sq += r.output.plane(n, c)[i] * r.output.plane(n, c)[i];
        xmean += x.plane(n, c)[i];
      }
    CHECK(mean / 36.0 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sq / 36.0 == doctest::Approx(1.0).epsilon(1e-3));
    // running = 0.9 * 0 + 0.1 * batch mean
    CHECK(r.running_mean[c] == doctest::Approx(0.1 * xmean / 36.0));
  }
  const BnResult<double> inf = batchnorm(x, p, BnMode::infer);
  CHECK(inf.running_mean == p.running_mean);
}

TEST_CASE("activation gradients match finite differences") {
  const Activation acts[] = {Activation::relu(), Activation::leaky_relu(0.2), Activation::tanh(),
                             Activation::sigmoid()};
  for (std::uint64_t seed = 300; seed < 305; ++seed) {
    for (Activation a : acts) {
      CHECK(activation_grad_error(seed, a) <= kOpTolerance);
    }
  }
}

TEST_CASE("activations take their textbook values") {
  const Tensor4<double> x({1, 1, 1, 4}, {-2.0, -0.5, 0.0, 1.5});
  const Tensor4<double> relu = activate(x, Activation::relu());
  const Tensor4<double> leaky = activate(x, Activation::leaky_relu(0.2));
  const Tensor4<double> sig = activate(x, Activation::sigmoid());
  const Tensor4<double> th = activate(x, Activation::tanh());
  CHECK(relu.data()[0] == 0.0);
  CHECK(relu.data()[3] == 1.5);
  CHECK(leaky.data()[0] == doctest::Approx(-0.4));
  CHECK(sig.data()[2] == 0.5);
  CHECK(th.data()[3] == doctest::Approx(std::tanh(1.5)));
}

TEST_CASE("channel concat and slice round trip") {
  Rng rng(4);
  const Tensor4<float> a = random_tensor<float>({2, 3, 4, 5}, rng);
  const Tensor4<float> b = random_tensor<float>({2, 2, 4, 5}, rng);
  const Tensor4<float> ab = concat_channels(a, b);
  CHECK(ab.shape() == Shape4{2, 5, 4, 5});
  const Tensor4<float> back = slice_channels(ab, 3, 2);
  CHECK(std::equal(back.values().begin(), back.values().end(), b.values().begin()));
  CHECK(slice_batch(ab, 1, 1).shape() == Shape4{1, 5, 4, 5});
  CHECK_THROWS_AS(concat_channels(a, Tensor4<float>({1, 2, 4, 5})), ContractError);
}

TEST_CASE("grad_check flags a wrong gradient and a non-finite objective") {
  std::vector<double> v = {1.0, 2.0};
  const std::vector<double> wrong = {2.0, 0.0};  // d/dv (v0^2 + v1) = (2, 1)
  const GradProbe probes[] = {{"v", v, wrong}};
  const GradCheckReport r = grad_check("toy", [&] { return v[0] * v[0] + v[1]; }, probes);
  CHECK(r.max_relative_error == doctest::Approx(1.0));
  CHECK(r.worst_index == 1);
  CHECK(v[0] == 1.0);
  CHECK_THROWS_AS(grad_check("nan", [] { return std::nan(""); }, probes), NumericError);
}
