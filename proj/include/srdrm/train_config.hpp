#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "srdrm/losses.hpp"
#include "srdrm/optimizer.hpp"

namespace srdrm {

enum class TrainMode { gen, gan };

struct TrainConfig {
  TrainMode mode = TrainMode::gen;
  int scale = 4;                 // 2, 4 or 8
  int epochs = 20;
  std::size_t batch_size = 4;
  AdamParams adam;
  LossWeights weights;
  std::uint64_t seed = 0;
  int checkpoint_every = 5;      // epochs between checkpoints
  bool tiny_profile = false;
  std::optional<std::size_t> max_steps;  // stops early after this many steps
  bool freeze_discriminator = false;
  std::optional<std::filesystem::path> feature_extractor;  // manifest path

  void validate() const;  // ConfigError
  int scale_exp() const;

  bool operator==(const TrainConfig&) const = default;
};

std::string mode_name(TrainMode mode);
TrainMode parse_mode(const std::string& name);  // ConfigError when unknown

// One `key = value` per line; '#' starts a comment. Keys:
//   mode, scale, epochs, batch_size, learning_rate, adam_beta1, adam_beta2,
//   adam_epsilon, weight_content, weight_perceptual, weight_l2,
//   weight_adversarial, seed, checkpoint_every, tiny_profile, max_steps,
//   freeze_discriminator, feature_extractor
// Unknown or repeated keys and unparsable values raise ConfigError. A
// relative feature_extractor path is resolved against `base_dir`.
TrainConfig parse_train_config(const std::string& text,
                               const std::filesystem::path& base_dir = {});
TrainConfig read_train_config(const std::filesystem::path& path);
// Writes every key; parse_train_config(format_train_config(c)) == c.
std::string format_train_config(const TrainConfig& config);

}  // namespace srdrm
