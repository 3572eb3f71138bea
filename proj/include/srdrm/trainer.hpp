#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srdrm/datakit.hpp"
#include "srdrm/discriminator.hpp"
#include "srdrm/feature_extractor.hpp"
#include "srdrm/generator.hpp"
#include "srdrm/optimizer.hpp"
#include "srdrm/train_config.hpp"

namespace srdrm {

struct StepRecord {
  std::size_t step = 0;   // 1-based, monotone
  std::size_t epoch = 0;  // 1-based
  double total = 0.0;
  double content = 0.0;
  double perceptual = 0.0;
  double l2 = 0.0;
  double adversarial = 0.0;  // generator's -log D term; 0 in gen mode
  double d_loss = 0.0;       // 0 in gen mode
  double d_real_mean = 0.0;  // mean discriminator output on real pairs
  double d_fake_mean = 0.0;

  bool operator==(const StepRecord&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t val_pairs = 0;  // 0 when the val split is empty
  double val_psnr = 0.0;
  double val_ssim = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

// Equality covers the loss and validation records only; wall times differ
// between otherwise identical runs.
struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_wall_ms;

  bool operator==(const TrainLog& o) const {
    return steps == o.steps && epochs == o.epochs;
  }
};

// Step records as CSV with round-trip precision.
std::string format_train_log_csv(const TrainLog& log);
std::string format_validation_csv(const TrainLog& log);

struct TrainResult {
  TrainLog log;
  Generator<float> generator;
  std::optional<Discriminator<float>> discriminator;
  std::vector<std::filesystem::path> checkpoints;
};

// Saturation threshold of the collapse diagnostic.
inline constexpr std::size_t kCollapseSteps = 100;

// Output directory contents:
//   ckpt_epoch<NNNN>.srdrm  every checkpoint_every epochs
//   final.srdrm             after the last step
//   train_log.csv           per-step losses
//   validation.csv          per-epoch val PSNR/SSIM
//   timing.csv              per-step wall time (not part of the log equality)
//   config.txt              the effective configuration
// A non-finite loss writes the log so far and raises NumericError naming the
// step. In gan mode, 100 consecutive steps whose discriminator maps contain
// only exact 0/1 values also raise NumericError.
TrainResult train_generative(const TrainConfig& config, const DatasetManifest& manifest,
                             const std::filesystem::path& out_dir);
TrainResult train_adversarial(const TrainConfig& config, const DatasetManifest& manifest,
                              const std::filesystem::path& out_dir);
// Dispatches on config.mode.
TrainResult train(const TrainConfig& config, const DatasetManifest& manifest,
                  const std::filesystem::path& out_dir);

GeneratorConfig generator_config_for(const TrainConfig& config);
DiscriminatorConfig discriminator_config_for(const TrainConfig& config);

// Discriminator condition: the LR batch bicubically resized to the HR extent
// and clamped to [-1, 1].
Tensor4<float> upsample_condition(const Tensor4<float>& lr, std::size_t width,
                                  std::size_t height);

}  // namespace srdrm
