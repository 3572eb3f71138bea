#include "srdrm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <utility>

#include <fmt/format.h>

#include "srdrm/checkpoint.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/losses.hpp"
#include "srdrm/metrics.hpp"
#include "srdrm/random.hpp"

namespace srdrm {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kGeneratorStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kDiscriminatorStream = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  os << text;
  if (!os) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

void write_logs(const TrainLog& log, const fs::path& out_dir) {
  write_text(out_dir / "train_log.csv", format_train_log_csv(log));
  write_text(out_dir / "validation.csv", format_validation_csv(log));
  std::string timing = "step,wall_ms\n";
  for (std::size_t i = 0; i < log.step_wall_ms.size(); ++i) {
    timing += fmt::format("{},{:.3f}\n", i + 1, log.step_wall_ms[i]);
  }
  write_text(out_dir / "timing.csv", timing);
}

Tensor4<float> concat_batch(const Tensor4<float>& a, const Tensor4<float>& b) {
  const Shape4& sa = a.shape();
  require_same_shape({1, sa.c, sa.h, sa.w}, {1, b.shape().c, b.shape().h, b.shape().w},
                     "concat_batch");
  std::vector<float> values(a.values().begin(), a.values().end());
  values.insert(values.end(), b.values().begin(), b.values().end());
  return Tensor4<float>({sa.n + b.shape().n, sa.c, sa.h, sa.w}, std::move(values));
}

double mean_of(const Tensor4<float>& t) {
  double s = 0.0;
  for (float v : t.values()) s += v;
  return t.empty() ? 0.0 : s / static_cast<double>(t.size());
}

bool saturated(const Tensor4<float>& map) {
  return std::all_of(map.values().begin(), map.values().end(),
                     [](float v) { return v == 0.0f || v == 1.0f; });
}

std::vector<ParamView<const float>> const_views(const Generator<float>& g) {
  return g.parameters();
}
std::vector<ParamView<const float>> const_views(const Discriminator<float>& d) {
  return d.parameters();
}

void require_finite(const StepRecord& r, const TrainLog& log, const fs::path& out_dir) {
  const double values[] = {r.total, r.content, r.perceptual, r.l2, r.adversarial, r.d_loss};
  for (double v : values) {
    if (!std::isfinite(v)) {
      write_logs(log, out_dir);
      throw NumericError(fmt::format(
          "non-finite loss at step {} (epoch {}): total={} content={} perceptual={} l2={} "
          "adversarial={} d_loss={}",
          r.step, r.epoch, r.total, r.content, r.perceptual, r.l2, r.adversarial, r.d_loss));
    }
  }
}

// Phi(HR) per pair id. The extractor is frozen, so each target is evaluated
// once; entries past the budget are recomputed per step.
class TargetFeatureCache {
 public:
  TargetFeatureCache(const FeatureExtractor<float>& extractor, std::size_t budget_values)
      : extractor_(extractor), budget_(budget_values) {}

  // Empty for the identity extractor.
  std::optional<Tensor4<float>> features(const Batch& batch) {
    if (extractor_.is_identity()) return std::nullopt;
    std::optional<Tensor4<float>> out;
    for (std::size_t i = 0; i < batch.ids.size(); ++i) {
      Tensor4<float> computed;
      const Tensor4<float>* phi = nullptr;
      if (auto it = cache_.find(batch.ids[i]); it != cache_.end()) {
        phi = &it->second;
      } else {
        computed = extractor_.forward(slice_batch(batch.hr, i, 1));
        if (used_ + computed.size() <= budget_) {
          used_ += computed.size();
          phi = &cache_.emplace(batch.ids[i], std::move(computed)).first->second;
        } else {
          phi = &computed;
        }
      }
      if (!out) {
        const Shape4& s = phi->shape();
        out.emplace(Shape4{batch.ids.size(), s.c, s.h, s.w});
      }
      std::copy(phi->data(), phi->data() + phi->size(), out->data() + i * phi->size());
    }
    return out;
  }

 private:
  const FeatureExtractor<float>& extractor_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::map<std::string, Tensor4<float>> cache_;
};

constexpr std::size_t kFeatureCacheValues = std::size_t{64} << 20;

// The generator update shared by both modes. The adversarial term enters only
// when a discriminator is supplied and its weight is positive.
void generator_update(Generator<float>& gen, AdamState& adam, const AdamParams& hyper,
                      const FeatureExtractor<float>& extractor, const LossWeights& weights,
                      const Batch& batch, const Tensor4<float>* target_features,
                      const Discriminator<float>* disc, const Tensor4<float>* condition,
                      StepRecord& record, const TrainLog& log, const fs::path& out_dir) {
  const GeneratorPass<float> pass = gen.forward_pass(batch.lr, BnMode::train);
  const bool adversarial = disc != nullptr && weights.adversarial > 0.0;
  std::optional<DiscriminatorPass<float>> dpass;
  if (adversarial) dpass = disc->forward_pass(pass.output, *condition, BnMode::train);

  const GeneratorLoss<float> loss = generator_total_loss(
      weights, extractor, pass.output, batch.hr, adversarial ? &dpass->output : nullptr,
      target_features);
  record.total = loss.total;
  record.content = loss.content;
  record.perceptual = loss.perceptual;
  record.l2 = loss.l2;
  record.adversarial = loss.adversarial;
  require_finite(record, log, out_dir);

  Tensor4<float> d_out = loss.d_generated;
  if (adversarial) {
    const DiscriminatorGradients<float> dg = disc->backward(*dpass, loss.d_validity, true);
    d_out += dg.d_candidate;
  }
  const Generator<float> grads = gen.backward(pass, d_out);
  adam_step(gen.parameters(), const_views(grads), adam, hyper);
  gen.commit_running_stats(pass);
}

struct DiscriminatorStep {
  double d_loss = 0.0;
  double real_mean = 0.0;
  double fake_mean = 0.0;
  bool saturated = false;
};

// Real and fake pairs go through one pass as a single batch of 2N.
DiscriminatorStep discriminator_update(Discriminator<float>& disc, AdamState& adam,
                                       const AdamParams& hyper, const Generator<float>& gen,
                                       const Batch& batch, const Tensor4<float>& condition,
                                       bool frozen) {
  const Tensor4<float> fake = gen.forward(batch.lr, BnMode::train);
  const std::size_t n = batch.hr.shape().n;
  const Tensor4<float> candidates = concat_batch(batch.hr, fake);
  const Tensor4<float> conditions = concat_batch(condition, condition);
  const DiscriminatorPass<float> pass = disc.forward_pass(candidates, conditions, BnMode::train);
  const Tensor4<float> real_map = slice_batch(pass.output, 0, n);
  const Tensor4<float> fake_map = slice_batch(pass.output, n, n);
  const AdversarialLoss<float> loss = adversarial_pair_loss(real_map, fake_map);

  DiscriminatorStep out;
  out.d_loss = loss.d_loss;
  out.real_mean = mean_of(real_map);
  out.fake_mean = mean_of(fake_map);
  out.saturated = saturated(real_map) || saturated(fake_map);
  if (frozen || !std::isfinite(loss.d_loss)) return out;

  const Tensor4<float> d_map = concat_batch(loss.d_loss_d_real, loss.d_loss_d_fake);
  const DiscriminatorGradients<float> grads = disc.backward(pass, d_map, false);
  adam_step(disc.parameters(), const_views(grads.params), adam, hyper);
  disc.commit_running_stats(pass);
  return out;
}

EpochRecord validate_epoch(const Generator<float>& gen, const DatasetManifest& manifest,
                           int scale, std::size_t epoch) {
  EpochRecord rec;
  rec.epoch = epoch;
  if (manifest.pairs(Split::val).empty()) return rec;
  BatchStream stream(manifest, Split::val, scale, 1, 0, false);
  const SsimParams ssim_params;
  const auto window = static_cast<std::size_t>(ssim_params.window);
  while (auto batch = stream.next()) {
    const ImageRGB8 out = tensor_to_image(gen.forward(batch->lr));
    const ImageRGB8 truth = tensor_to_image(batch->hr);
    rec.val_psnr += psnr(out, truth);
    if (truth.width >= window && truth.height >= window) rec.val_ssim += ssim(out, truth);
    ++rec.val_pairs;
  }
  rec.val_psnr /= static_cast<double>(rec.val_pairs);
  rec.val_ssim /= static_cast<double>(rec.val_pairs);
  return rec;
}

void save_models(const Generator<float>& gen, const Discriminator<float>* disc,
                 const fs::path& path) {
  Checkpoint ckpt = to_checkpoint(gen);
  if (disc != nullptr) append_to_checkpoint(ckpt, *disc);
  write_checkpoint(ckpt, path);
}

TrainResult run(const TrainConfig& config, const DatasetManifest& manifest,
                const fs::path& out_dir, bool adversarial) {
  config.validate();
  fs::create_directories(out_dir);
  write_text(out_dir / "config.txt", format_train_config(config));

  Generator<float> gen =
      build_generator<float>(generator_config_for(config), derive_seed(config.seed, kGeneratorStream));
  std::optional<Discriminator<float>> disc;
  if (adversarial) {
    disc = build_discriminator<float>(discriminator_config_for(config),
                                      derive_seed(config.seed, kDiscriminatorStream));
  }
  const FeatureExtractor<float> extractor =
      build_feature_extractor(ExtractorSource{config.feature_extractor, kDefaultExtractorSeed});
  BatchStream stream(manifest, Split::train, config.scale, config.batch_size,
                     derive_seed(config.seed, kBatchStream));
  TargetFeatureCache target_cache(extractor, kFeatureCacheValues);

  AdamState g_adam, d_adam;
  TrainLog log;
  std::vector<fs::path> checkpoints;
  std::size_t step = 0;
  std::size_t saturated_run = 0;
  bool stop = false;
  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    stream.start_epoch(static_cast<std::size_t>(epoch));
    while (auto batch = stream.next()) {
      const auto t0 = std::chrono::steady_clock::now();
      StepRecord rec;
      rec.step = ++step;
      rec.epoch = static_cast<std::size_t>(epoch);
      std::optional<Tensor4<float>> condition;
      if (adversarial) {
        condition = upsample_condition(batch->lr, batch->hr.shape().w, batch->hr.shape().h);
        const DiscriminatorStep ds = discriminator_update(
            *disc, d_adam, config.adam, gen, *batch, *condition, config.freeze_discriminator);
        rec.d_loss = ds.d_loss;
        rec.d_real_mean = ds.real_mean;
        rec.d_fake_mean = ds.fake_mean;
        saturated_run = ds.saturated ? saturated_run + 1 : 0;
      }
      const std::optional<Tensor4<float>> target_features =
          config.weights.content > 0.0 ? target_cache.features(*batch) : std::nullopt;
      generator_update(gen, g_adam, config.adam, extractor, config.weights, *batch,
                       target_features ? &*target_features : nullptr, disc ? &*disc : nullptr, condition ? &*condition : nullptr, rec, log,
                       out_dir);
      log.steps.push_back(rec);
      log.step_wall_ms.push_back(
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count());
      if (saturated_run >= kCollapseSteps) {
        write_logs(log, out_dir);
        throw NumericError(fmt::format(
            "discriminator output saturated at exactly 0/1 for {} consecutive steps (step {})",
            saturated_run, step));
      }
      if (config.max_steps && step >= *config.max_steps) {
        stop = true;
        break;
      }
    }
    if (!stop) {
      log.epochs.push_back(validate_epoch(gen, manifest, config.scale,
                                          static_cast<std::size_t>(epoch)));
      if (epoch % config.checkpoint_every == 0) {
        const fs::path p = out_dir / fmt::format("ckpt_epoch{:04}.srdrm", epoch);
        save_models(gen, disc ? &*disc : nullptr, p);
        checkpoints.push_back(p);
      }
    }
  }
  const fs::path final_path = out_dir / "final.srdrm";
  save_models(gen, disc ? &*disc : nullptr, final_path);
  checkpoints.push_back(final_path);
  write_logs(log, out_dir);
  return TrainResult{std::move(log), std::move(gen), std::move(disc), std::move(checkpoints)};
}

}  // namespace

std::string format_train_log_csv(const TrainLog& log) {
  std::string out =
      "step,epoch,total,content,perceptual,l2,adversarial,d_loss,d_real_mean,d_fake_mean\n";
  for (const StepRecord& r : log.steps) {
    out += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                       r.step, r.epoch, r.total, r.content, r.perceptual, r.l2, r.adversarial,
                       r.d_loss, r.d_real_mean, r.d_fake_mean);
  }
  return out;
}

std::string format_validation_csv(const TrainLog& log) {
  std::string out = "epoch,val_pairs,val_psnr,val_ssim\n";
  for (const EpochRecord& r : log.epochs) {
    out += fmt::format("{},{},{:.17g},{:.17g}\n", r.epoch, r.val_pairs, r.val_psnr, r.val_ssim);
  }
  return out;
}

GeneratorConfig generator_config_for(const TrainConfig& config) {
  return config.tiny_profile ? GeneratorConfig::tiny(config.scale_exp())
                             : GeneratorConfig{.scale_exp = config.scale_exp()};
}

DiscriminatorConfig discriminator_config_for(const TrainConfig& config) {
  return config.tiny_profile ? DiscriminatorConfig::tiny() : DiscriminatorConfig{};
}

Tensor4<float> upsample_condition(const Tensor4<float>& lr, std::size_t width,
                                  std::size_t height) {
  Tensor4<float> up = resize_bicubic(lr, width, height);
  for (float& v : up.values()) v = std::clamp(v, -1.0f, 1.0f);
  return up;
}

TrainResult train_generative(const TrainConfig& config, const DatasetManifest& manifest,
                             const fs::path& out_dir) {
  if (config.mode != TrainMode::gen) throw ConfigError("train_generative needs mode = gen");
  return run(config, manifest, out_dir, false);
}

TrainResult train_adversarial(const TrainConfig& config, const DatasetManifest& manifest,
                              const fs::path& out_dir) {
  if (config.mode != TrainMode::gan) throw ConfigError("train_adversarial needs mode = gan");
  return run(config, manifest, out_dir, true);
}

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest,
                  const fs::path& out_dir) {
  return config.mode == TrainMode::gen ? train_generative(config, manifest, out_dir)
                                       : train_adversarial(config, manifest, out_dir);
}

}  // namespace srdrm
