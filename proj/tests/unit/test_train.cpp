#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "srdrm/checkpoint.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/inference.hpp"
#include "srdrm/optimizer.hpp"
#include "srdrm/train_config.hpp"
#include "srdrm/trainer.hpp"
#include "test_support.hpp"

using namespace srdrm;
using namespace srdrm::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TrainConfig tiny_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.scale = 2;
  c.epochs = 2;
  c.batch_size = 2;
  c.tiny_profile = true;
  c.checkpoint_every = 1;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("adam first step moves each weight by about lr") {
  std::vector<float> p = {1.0f, -2.0f, 0.5f};
  const std::vector<float> g = {0.3f, -4.0f, 0.0f};
  std::vector<ParamView<float>> params = {{"p", {3}, std::span<float>(p)}};
  const std::vector<ParamView<const float>> grads = {{"p", {3}, std::span<const float>(g)}};
  AdamState state;
  AdamParams hyper;
  hyper.learning_rate = 0.01;
  adam_step(params, grads, state, hyper);
  // m_hat = g, v_hat = g^2: update = lr * g / (|g| + eps).
  CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)));
  CHECK(p[2] == 0.5f);
  CHECK(state.step == 1);
  CHECK(state.m[0][1] == doctest::Approx(0.1 * -4.0));
  CHECK(state.v[0][1] == doctest::Approx(0.001 * 16.0));

  const std::vector<ParamView<const float>> short_grads = {{"p", {2}, std::span<const float>(g).first(2)}};
  CHECK_THROWS_AS(adam_step(params, short_grads, state, hyper), ContractError);
}

TEST_CASE("train config text round trip") {
  TrainConfig c = tiny_config(TrainMode::gan);
  c.adam.learning_rate = 3e-4;
  c.weights.adversarial = 0.0;
  c.max_steps = 17;
  c.freeze_discriminator = true;
  c.feature_extractor = "/abs/fx.txt";
  CHECK(parse_train_config(format_train_config(c)) == c);
  CHECK(parse_train_config(format_train_config(TrainConfig{})) == TrainConfig{});

  const TrainConfig p = parse_train_config("# comment\nmode = gan\nscale = 8\nfeature_extractor = fx.txt\n", "/base");
  CHECK(p.mode == TrainMode::gan);
  CHECK(p.scale_exp() == 3);
  CHECK(*p.feature_extractor == fs::path("/base/fx.txt"));

  CHECK_THROWS_AS(parse_train_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("scale = 2\nscale = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("epochs = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("scale = 3\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_train_config("learning_rate = 0\n").validate(), ConfigError);
}

TEST_CASE("generative training writes its outputs and is reproducible") {
  TempDir dir("train_gen");
  const DatasetManifest m = synthetic_dataset(dir.path() / "data", 3, 8, 6, 2, 3);
  TrainConfig c = tiny_config(TrainMode::gen);
  c.epochs = 3;
  c.checkpoint_every = 2;
  const TrainResult a = train(c, m, dir.path() / "a");
  const TrainResult b = train(c, m, dir.path() / "b");
  CHECK(a.log.steps.size() == 6);
  CHECK(a.log.epochs.size() == 3);
  CHECK(a.log == b.log);
  CHECK(a.checkpoints.size() == 2);  // floor(3 / 2) + final
  for (const char* f : {"train_log.csv", "validation.csv", "timing.csv", "config.txt", "final.srdrm",
                        "ckpt_epoch0002.srdrm"}) {
    CHECK(fs::exists(dir.path() / "a" / f));
  }
  CHECK(slurp(dir.path() / "a" / "final.srdrm") == slurp(dir.path() / "b" / "final.srdrm"));
  CHECK(slurp(dir.path() / "a" / "train_log.csv") == slurp(dir.path() / "b" / "train_log.csv"));
  CHECK(read_train_config(dir.path() / "a" / "config.txt") == c);
  for (const StepRecord& s : a.log.steps) {
    CHECK(std::isfinite(s.total));
    CHECK(s.d_loss == 0.0);
  }
  CHECK(load_generator(dir.path() / "a" / "final.srdrm").config() == GeneratorConfig::tiny(1));
}

TEST_CASE("adversarial training records discriminator statistics") {
  TempDir dir("train_gan");
  const DatasetManifest m = synthetic_dataset(dir.path() / "data", 2, 16, 16, 2, 4);
  TrainConfig c = tiny_config(TrainMode::gan);
  c.epochs = 1;
  const TrainResult r = train(c, m, dir.path() / "out");
  REQUIRE(r.discriminator.has_value());
  REQUIRE(r.log.steps.size() == 1);
  const StepRecord& s = r.log.steps[0];
  CHECK(s.d_loss > 0.0);
  CHECK((s.d_real_mean > 0.0 && s.d_real_mean < 1.0));
  CHECK(s.adversarial > 0.0);
  const Checkpoint ck = read_checkpoint(dir.path() / "out" / "final.srdrm");
  CHECK(ck.find("d.layer0.conv.weight") != nullptr);
}

TEST_CASE("a diverging run raises NumericError and keeps the log") {
  TempDir dir("train_nan");
  const DatasetManifest m = synthetic_dataset(dir.path() / "data", 2, 8, 6, 2, 6);
  TrainConfig c = tiny_config(TrainMode::gen);
  c.adam.learning_rate = 1e300;
  CHECK_THROWS_AS(train(c, m, dir.path() / "out"), NumericError);
  CHECK(fs::exists(dir.path() / "out" / "train_log.csv"));
}

TEST_CASE("training rejects a manifest without the requested scale") {
  TempDir dir("train_scale");
  const DatasetManifest m = synthetic_dataset(dir.path() / "data", 2, 8, 6, 2, 6);
  TrainConfig c = tiny_config(TrainMode::gen);
  c.scale = 4;
  CHECK_THROWS_AS(train(c, m, dir.path() / "out"), Error);
}

TEST_CASE("roi parsing and checking") {
  CHECK(parse_roi("1,2,30,40") == Roi{1, 2, 30, 40});
  CHECK_THROWS_AS(parse_roi("1,2,30"), ContractError);
  CHECK_THROWS_AS(parse_roi("1,2,a,4"), ContractError);
  CHECK(parse_size("80x60") == std::pair<std::size_t, std::size_t>{80, 60});
  CHECK_THROWS_AS(parse_size("0x60"), ContractError);
  CHECK_NOTHROW(check_roi({0, 0, 8, 8}, 8, 8));
  CHECK_THROWS_AS(check_roi({0, 0, 7, 8}, 20, 20), ContractError);
  CHECK_THROWS_AS(check_roi({15, 0, 8, 8}, 20, 20), ContractError);
}

TEST_CASE("super_resolve and bench") {
  const Generator<float> g = build_generator<float>(GeneratorConfig::tiny(2), 1);
  const ImageRGB8 img = smooth_image(20, 12, 1);
  const ImageRGB8 out = super_resolve(g, img);
  CHECK(out.width == 80);
  CHECK(out.height == 48);
  const ImageRGB8 zoom = super_resolve(g, img, Roi{4, 2, 10, 8});
  CHECK(zoom.width == 40);
  CHECK(zoom.height == 32);
  const BenchReport r = bench(g, 8, 8, 10, 1);
  CHECK(r.samples_ms.size() == 10);
  CHECK(r.median_ms <= r.p95_ms);
  CHECK(r.fps == doctest::Approx(1000.0 / r.mean_ms));
  CHECK(format_bench_csv(r).rfind("width,height,scale", 0) == 0);
  CHECK_THROWS_AS(bench(g, 8, 8, 9), ContractError);
}

TEST_CASE("eval_report on the training pairs") {
  TempDir dir("eval_report");
  const DatasetManifest m = synthetic_dataset(dir.path(), 3, 16, 12, 2, 8);
  const Generator<float> g = build_generator<float>(GeneratorConfig::tiny(1), 1);
  const MetricReport r = eval_report(g, m, Split::train);
  CHECK(r.rows.size() == 3);
  REQUIRE(r.mean.has_value());
  CHECK(r.scale_tag == "2x");
  CHECK_FALSE(eval_report(g, m, Split::test).mean.has_value());
  const Generator<float> g4 = build_generator<float>(GeneratorConfig::tiny(2), 1);
  CHECK_THROWS_AS(eval_report(g4, m, Split::train), ContractError);
}
