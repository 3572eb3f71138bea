#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srdrm/datakit.hpp"
#include "srdrm/generator.hpp"
#include "srdrm/image.hpp"
#include "srdrm/metrics.hpp"

namespace srdrm {

struct Roi {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;

  bool operator==(const Roi&) const = default;
};

inline constexpr std::size_t kMinRoiExtent = 8;

// "X,Y,W,H" with non-negative integers; ContractError when malformed.
Roi parse_roi(const std::string& text);
// "WxH"; ContractError when malformed or zero.
std::pair<std::size_t, std::size_t> parse_size(const std::string& text);

// ContractError unless the roi lies inside the image and w, h >= 8.
void check_roi(const Roi& roi, std::size_t width, std::size_t height);

// Crops (optionally), converts, runs the generator and denormalizes.
ImageRGB8 super_resolve(const Generator<float>& gen, const ImageRGB8& input,
                        const std::optional<Roi>& roi = std::nullopt);

// File-level inference. The roi is checked against the input before the
// checkpoint is read.
void infer_file(const std::filesystem::path& ckpt, const std::filesystem::path& input,
                const std::optional<Roi>& roi, const std::filesystem::path& output);

struct BenchReport {
  std::size_t width = 0;
  std::size_t height = 0;
  int scale = 0;
  std::size_t iterations = 0;
  std::size_t warmup = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;  // nearest-rank
  double fps = 0.0;     // 1000 / mean_ms
  std::vector<double> samples_ms;
};

inline constexpr std::size_t kMinBenchIterations = 10;

// Times `iterations` single-image forward passes on a fixed pseudo-random
// input of the given extent after `warmup` untimed passes.
BenchReport bench(const Generator<float>& gen, std::size_t width, std::size_t height,
                  std::size_t iterations, std::size_t warmup = 3);
std::string format_bench(const BenchReport& report);
// Header "width,height,scale,iterations,mean_ms,median_ms,p95_ms,fps".
std::string format_bench_csv(const BenchReport& report);

// Super-resolves every LR input of a split at the generator's scale and
// scores it against the HR reference. Rows follow id order.
MetricReport eval_report(const Generator<float>& gen, const DatasetManifest& manifest,
                         Split split);

}  // namespace srdrm
