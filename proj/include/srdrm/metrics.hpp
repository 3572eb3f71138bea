#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srdrm/image.hpp"

namespace srdrm {

// Reported in place of +inf when the two images are identical.
inline constexpr double kPsnrCap = 100.0;

// 10 log10(255^2 / MSE) with the MSE taken over all three channels.
double psnr(const ImageRGB8& a, const ImageRGB8& b);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_taps(const SsimParams& params);

// ITU-R BT.601 luma 0.299 R + 0.587 G + 0.114 B, unrounded.
std::vector<double> luma(const ImageRGB8& img);

// Mean SSIM over all fully-contained windows of two single-channel planes.
double ssim_plane(std::span<const double> a, std::span<const double> b,
                  std::size_t width, std::size_t height,
                  const SsimParams& params = {});

// SSIM on luma. Both extents must be at least the window size.
double ssim(const ImageRGB8& a, const ImageRGB8& b, const SsimParams& params = {});

struct UiqmParams {
  double c1 = 0.0282;  // colorfulness weight
  double c2 = 0.2953;  // sharpness weight
  double c3 = 3.5753;  // contrast weight
  double trim = 0.1;   // alpha-trim fraction on each side
  std::size_t block = 8;
};

struct UiqmResult {
  double uicm = 0.0;
  double uism = 0.0;
  double uiconm = 0.0;
  double uiqm = 0.0;
};

// Underwater image quality: colorfulness (alpha-trimmed RG/YB opponent
// statistics), sharpness (block EME of Sobel-weighted channels) and
// contrast (block log-AMEE), linearly combined.
UiqmResult uiqm(const ImageRGB8& img, const UiqmParams& params = {});

struct MetricRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double uiqm = 0.0;
};

struct MetricReport {
  std::string scale_tag;  // "2x", "4x", "8x" or empty
  std::vector<MetricRow> rows;
  std::vector<std::string> unmatched;  // names present on only one side
  std::optional<MetricRow> mean;       // absent when there are no rows

  void recompute_mean();
};

// PSNR and SSIM of generated against truth, UIQM of generated.
MetricRow score_pair(std::string id, const ImageRGB8& generated, const ImageRGB8& truth);

// Pairs same-named images of the two directories (lexicographic order) and
// scores generated against truth. UIQM is measured on the generated image.
MetricReport evaluate_dataset(const std::filesystem::path& generated_dir,
                              const std::filesystem::path& truth_dir,
                              std::string scale_tag = {});

// Aligned text table.
std::string format_report(const MetricReport& report);
// Header "id,psnr,ssim,uiqm"; a final "mean" row when aggregates exist.
std::string format_report_csv(const MetricReport& report);
// Writes `path` (text) and `path` with a .csv extension (machine-readable).
void write_report(const MetricReport& report, const std::filesystem::path& path);

}  // namespace srdrm
