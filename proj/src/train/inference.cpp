#include "srdrm/inference.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "srdrm/checkpoint.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/random.hpp"

namespace srdrm {

namespace fs = std::filesystem;

namespace {

std::vector<std::size_t> parse_list(const std::string& text, char sep, std::size_t count,
                                    const char* what) {
  std::vector<std::size_t> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t end = std::min(text.find(sep, begin), text.size());
    std::size_t v = 0;
    const char* first = text.data() + begin;
    const char* last = text.data() + end;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (first == last || ec != std::errc() || ptr != last) {
      throw ContractError(fmt::format("malformed {} '{}'", what, text));
    }
    out.push_back(v);
    if (end == text.size()) break;
    begin = end + 1;
  }
  if (out.size() != count) throw ContractError(fmt::format("malformed {} '{}'", what, text));
  return out;
}

}  // namespace

Roi parse_roi(const std::string& text) {
  const auto v = parse_list(text, ',', 4, "roi (expected X,Y,W,H)");
  return Roi{v[0], v[1], v[2], v[3]};
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
  const auto v = parse_list(text, 'x', 2, "size (expected WxH)");
  if (v[0] == 0 || v[1] == 0) throw ContractError(fmt::format("size '{}' must be positive", text));
  return {v[0], v[1]};
}

void check_roi(const Roi& roi, std::size_t width, std::size_t height) {
  if (roi.w < kMinRoiExtent || roi.h < kMinRoiExtent) {
    throw ContractError(fmt::format("roi {}x{} is smaller than the {}x{} minimum", roi.w, roi.h,
                                    kMinRoiExtent, kMinRoiExtent));
  }
  if (roi.x + roi.w > width || roi.y + roi.h > height) {
    throw ContractError(fmt::format("roi ({}, {}, {}x{}) lies outside the {}x{} input", roi.x,
                                    roi.y, roi.w, roi.h, width, height));
  }
}

ImageRGB8 super_resolve(const Generator<float>& gen, const ImageRGB8& input,
                        const std::optional<Roi>& roi) {
  ImageRGB8 region = input;
  if (roi) {
    check_roi(*roi, input.width, input.height);
    region = crop(input, roi->x, roi->y, roi->w, roi->h);
  }
  return tensor_to_image(gen.forward(image_to_tensor<float>(region)));
}

void infer_file(const fs::path& ckpt, const fs::path& input, const std::optional<Roi>& roi,
                const fs::path& output) {
  const ImageRGB8 img = read_image(input);
  if (roi) check_roi(*roi, img.width, img.height);
  const Generator<float> gen = load_generator(ckpt);
  const ImageRGB8 out = super_resolve(gen, img, roi);
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  write_image(out, output);
}

BenchReport bench(const Generator<float>& gen, std::size_t width, std::size_t height,
                  std::size_t iterations, std::size_t warmup) {
  if (iterations < kMinBenchIterations) {
    throw ContractError(fmt::format("bench needs at least {} iterations, got {}",
                                    kMinBenchIterations, iterations));
  }
  if (width == 0 || height == 0) throw ContractError("bench size must be positive");
  Tensor4<float> input({1, 3, height, width});
  Rng rng(0xBE7C4);
  for (float& v : input.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  for (std::size_t i = 0; i < warmup; ++i) (void)gen.forward(input);

  BenchReport r;
  r.width = width;
  r.height = height;
  r.scale = gen.config().scale();
  r.iterations = iterations;
  r.warmup = warmup;
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor4<float> out = gen.forward(input);
    const auto t1 = std::chrono::steady_clock::now();
    if (out.empty()) throw NumericError("bench: empty output");
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::vector<double> sorted = r.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double s : sorted) sum += s;
  r.mean_ms = sum / static_cast<double>(sorted.size());
  const std::size_t n = sorted.size();
  r.median_ms = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  r.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  r.fps = 1000.0 / r.mean_ms;
  return r;
}

std::string format_bench(const BenchReport& r) {
  return fmt::format(
      "input {}x{}  scale {}x  output {}x{}\n"
      "iterations {} (warmup {})\n"
      "mean   {:.3f} ms\nmedian {:.3f} ms\np95    {:.3f} ms\nfps    {:.2f}\n",
      r.width, r.height, r.scale, r.width * static_cast<std::size_t>(r.scale),
      r.height * static_cast<std::size_t>(r.scale), r.iterations, r.warmup, r.mean_ms,
      r.median_ms, r.p95_ms, r.fps);
}

std::string format_bench_csv(const BenchReport& r) {
  return fmt::format("width,height,scale,iterations,mean_ms,median_ms,p95_ms,fps\n"
                     "{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n",
                     r.width, r.height, r.scale, r.iterations, r.mean_ms, r.median_ms, r.p95_ms,
                     r.fps);
}

MetricReport eval_report(const Generator<float>& gen, const DatasetManifest& manifest,
                         Split split) {
  const int scale = gen.config().scale();
  if (!manifest.has_scale(scale)) {
    throw ContractError(fmt::format("manifest has no {}x LR images", scale));
  }
  const std::vector<ManifestPair>& pairs = manifest.pairs(split);
  MetricReport report;
  report.scale_tag = fmt::format("{}x", scale);
  report.rows.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ManifestPair& p = pairs[i];
    const auto lr = p.lr.find(scale);
    if (lr == p.lr.end()) {
      throw ContractError(fmt::format("pair '{}' has no {}x LR image", p.id, scale));
    }
    const ImageRGB8 input = read_image(manifest.root / lr->second);
    const ImageRGB8 truth = read_image(manifest.root / p.hr);
    report.rows[i] = score_pair(p.id, super_resolve(gen, input), truth);
  }
  report.recompute_mean();
  return report;
}

}  // namespace srdrm
