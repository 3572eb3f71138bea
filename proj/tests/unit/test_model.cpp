#include <doctest.h>

#include <cstring>

#include "grad_suite.hpp"
#include "srdrm/checkpoint.hpp"
#include "srdrm/discriminator.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/generator.hpp"
#include "test_support.hpp"

using namespace srdrm;
using namespace srdrm::testing;

TEST_CASE("generator output is 2^n times the input") {
  for (int n = 1; n <= 3; ++n) {
    const Generator<float> g = build_generator<float>(GeneratorConfig::tiny(n), 7);
    for (auto [h, w] : {std::pair{4, 4}, {5, 7}, {8, 6}, {3, 11}, {12, 9}}) {
      Rng rng(static_cast<std::uint64_t>(h * 100 + w));
      const Tensor4<float> x = random_tensor<float>({2, 3, std::size_t(h), std::size_t(w)}, rng);
      const Tensor4<float> y = g.forward(x);
      CHECK(y.shape() == Shape4{2, 3, std::size_t(h) << n, std::size_t(w) << n});
      for (float v : y.values()) REQUIRE((v >= -1.0f && v <= 1.0f));
    }
  }
}

TEST_CASE("generator parameter count has a closed form") {
  for (int n = 1; n <= 3; ++n) {
    for (const GeneratorConfig& c : {GeneratorConfig::tiny(n), [&] {
           GeneratorConfig d;
           d.scale_exp = n;
           return d;
         }()}) {
      CHECK(build_generator<float>(c, 1).parameter_count() == generator_parameter_count(c));
    }
  }
  GeneratorConfig bad;
  bad.scale_exp = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = GeneratorConfig::tiny(1);
  bad.residual_layers = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generator initialization is seeded") {
  const Generator<float> a = build_generator<float>(GeneratorConfig::tiny(2), 11);
  const Generator<float> b = build_generator<float>(GeneratorConfig::tiny(2), 11);
  const Generator<float> c = build_generator<float>(GeneratorConfig::tiny(2), 12);
  CHECK(to_checkpoint(a) == to_checkpoint(b));
  CHECK_FALSE(to_checkpoint(a) == to_checkpoint(c));
}

TEST_CASE("composed generator loss gradient") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    CAPTURE(seed);
    const GradCheckReport r = composed_generator_grad_check(seed, 3);
    CHECK(r.max_relative_error <= kComposedTolerance);
    CHECK(r.elements_skipped * 4 < r.elements_checked);
  }
}

TEST_CASE("generator with BN inside the DRM still differentiates") {
  GeneratorConfig c = GeneratorConfig::tiny(1);
  c.use_bn_in_drm = true;
  Generator<double> g = build_generator<double>(c, 5);
  Rng rng(5);
  Tensor4<double> x = random_tensor<double>({2, 3, 4, 4}, rng);
  const Tensor4<double> r = random_tensor<double>({2, 3, 8, 8}, rng);
  const GeneratorPass<double> pass = g.forward_pass(x, BnMode::train);
  const Generator<double> grads = g.backward(pass, r);
  auto params = g.parameters();
  const auto analytic = grads.parameters();
  std::vector<GradProbe> probes;
  for (std::size_t i = 0; i < params.size(); ++i) {
    probes.push_back({params[i].name, params[i].values, analytic[i].values});
  }
  std::uint64_t region = 0;
  auto objective = [&] {
    const GeneratorPass<double> p = g.forward_pass(x, BnMode::train);
    region = generator_region(p, 1);
    return weighted_sum(p.output, r);
  };
  GradCheckOptions opt = fd_options(3, 5);
  opt.region = [&] { return region; };
  const GradCheckReport rep = grad_check("generator+bn", objective, probes, opt);
  CHECK(rep.max_relative_error <= kComposedTolerance);
}

TEST_CASE("discriminator map is input / 16") {
  const Discriminator<float> d = build_discriminator<float>(DiscriminatorConfig::tiny(), 3);
  for (auto [h, w] : {std::pair{16, 16}, {48, 64}, {32, 80}, {64, 48}, {96, 128}}) {
    const Tensor4<float> x({1, 3, std::size_t(h), std::size_t(w)}, 0.25f);
    const Tensor4<float> v = d.forward(x, x);
    CHECK(v.shape() == Shape4{1, 1, std::size_t(h / 16), std::size_t(w / 16)});
    for (float p : v.values()) CHECK((p > 0.0f && p < 1.0f));
  }
  CHECK(DiscriminatorConfig{}.downsample_factor() == 16);
  CHECK(DiscriminatorConfig::tiny().filters_at(7) == 32);
  CHECK(DiscriminatorConfig{}.filters_at(0) == 32);
  CHECK(DiscriminatorConfig{}.filters_at(3) == 256);
}

TEST_CASE("discriminator gradients match finite differences") {
  Discriminator<double> d = build_discriminator<double>(DiscriminatorConfig::tiny(), 21);
  Rng rng(21);
  Tensor4<double> cand = random_tensor<double>({2, 3, 64, 64}, rng);
  const Tensor4<double> cond = random_tensor<double>({2, 3, 64, 64}, rng);
  const DiscriminatorPass<double> pass = d.forward_pass(cand, cond, BnMode::train);
  const Tensor4<double> r = random_tensor<double>(pass.output.shape(), rng);
  const DiscriminatorGradients<double> g = d.backward(pass, r, true);
  auto params = d.parameters();
  const auto analytic = g.params.parameters();
  std::vector<GradProbe> probes;
  for (std::size_t i = 0; i < params.size(); ++i) {
    probes.push_back({params[i].name, params[i].values, analytic[i].values});
  }
  probes.push_back(probe("candidate", cand, g.d_candidate));
  std::uint64_t region = 0;
  auto objective = [&] {
    const DiscriminatorPass<double> p = d.forward_pass(cand, cond, BnMode::train);
    region = discriminator_region(p);
    return weighted_sum(p.output, r);
  };
  GradCheckOptions opt = fd_options(4, 21);
  opt.region = [&] { return region; };
  const GradCheckReport rep = grad_check("discriminator", objective, probes, opt);
  CAPTURE(rep.worst_probe);
  CHECK(rep.max_relative_error <= kComposedTolerance);
}

TEST_CASE("checkpoint round trip is bitwise") {
  TempDir dir("ckpt");
  for (int n = 1; n <= 3; ++n) {
    Generator<float> g = build_generator<float>(GeneratorConfig::tiny(n), 40 + n);
    const auto path = dir.path() / ("g" + std::to_string(n) + ".srdrm");
    save_checkpoint(g, path);
    const Generator<float> back = load_generator(path);
    CHECK(back.config() == g.config());
    Rng rng(n);
    const Tensor4<float> x = random_tensor<float>({1, 3, 6, 5}, rng);
    const Tensor4<float> a = g.forward(x), b = back.forward(x);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("checkpoint decoding rejects damage") {
  const Generator<float> g = build_generator<float>(GeneratorConfig::tiny(1), 1);
  const std::vector<std::uint8_t> good = encode_checkpoint(to_checkpoint(g));
  CHECK(decode_checkpoint(good) == to_checkpoint(g));

  std::vector<std::uint8_t> bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);

  bad = good;
  bad[8] = 2;  // version
  CHECK_THROWS_AS(decode_checkpoint(bad), VersionError);

  bad = good;
  bad[bad.size() / 2] ^= 0x40;  // payload bit flip
  CHECK_THROWS_AS(decode_checkpoint(bad), CorruptionError);

  bad = good;
  bad.resize(bad.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(bad), CorruptionError);

  bad = good;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(bad), CorruptionError);

  CHECK_THROWS_AS(load_generator("/nonexistent/none.srdrm"), IoError);
}

TEST_CASE("checkpoint rejects a mismatched architecture") {
  const Generator<float> g = build_generator<float>(GeneratorConfig::tiny(1), 1);
  const Checkpoint ck = to_checkpoint(g);
  CHECK_THROWS_AS(generator_from_checkpoint(ck, GeneratorConfig::tiny(2)), FormatError);
  GeneratorConfig wide = GeneratorConfig::tiny(1);
  wide.base_filters = 32;
  CHECK_THROWS_AS(generator_from_checkpoint(ck, wide), FormatError);
  CHECK(infer_generator_config(ck) == GeneratorConfig::tiny(1));
}

TEST_CASE("discriminator tensors live beside the generator") {
  const Generator<float> g = build_generator<float>(GeneratorConfig::tiny(1), 1);
  const Discriminator<float> d = build_discriminator<float>(DiscriminatorConfig::tiny(), 2);
  Checkpoint ck = to_checkpoint(g);
  append_to_checkpoint(ck, d);
  const Checkpoint back = decode_checkpoint(encode_checkpoint(ck));
  CHECK(infer_generator_config(back) == g.config());
  const Discriminator<float> d2 = discriminator_from_checkpoint(back, DiscriminatorConfig::tiny());
  Rng rng(2);
  const Tensor4<float> x = random_tensor<float>({1, 3, 32, 32}, rng);
  const Tensor4<float> a = d.forward(x, x), b = d2.forward(x, x);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}
