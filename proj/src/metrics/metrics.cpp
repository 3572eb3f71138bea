#include "srdrm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srdrm/errors.hpp"

namespace srdrm {

namespace {

void require_same_extent(const ImageRGB8& a, const ImageRGB8& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw ContractError(fmt::format("{}: image extents differ ({}x{} vs {}x{})", what,
                                    a.width, a.height, b.width, b.height));
  }
}

// Valid-region separable filtering: out[(y, x)] for the (h - k + 1) x
// (w - k + 1) windows fully inside the plane.
std::vector<double> filter_valid(std::span<const double> plane, std::size_t width,
                                 std::size_t height, const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t ow = width - k + 1;
  const std::size_t oh = height - k + 1;
  std::vector<double> horizontal(height * ow);
  for (std::size_t y = 0; y < height; ++y) {
    const double* row = plane.data() + y * width;
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * row[x + t];
      horizontal[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * horizontal[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const ImageRGB8& a, const ImageRGB8& b) {
  require_same_extent(a, b, "psnr");
  if (a.pixels.empty()) throw ContractError("psnr: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.pixels.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

std::vector<double> gaussian_taps(const SsimParams& params) {
  if (params.window < 1 || params.window % 2 == 0 || !(params.sigma > 0.0)) {
    throw ContractError(fmt::format("ssim window must be odd and sigma positive ({} / {})",
                                    params.window, params.sigma));
  }
  const int radius = params.window / 2;
  std::vector<double> taps(static_cast<std::size_t>(params.window));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (params.sigma * params.sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

std::vector<double> luma(const ImageRGB8& img) {
  std::vector<double> y(img.width * img.height);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] +
           0.114 * img.pixels[3 * i + 2];
  }
  return y;
}

double ssim_plane(std::span<const double> a, std::span<const double> b,
                  std::size_t width, std::size_t height, const SsimParams& params) {
  const std::size_t k = static_cast<std::size_t>(params.window);
  if (width < k || height < k) {
    throw ContractError(fmt::format("ssim: image {}x{} is smaller than the {}x{} window",
                                    width, height, k, k));
  }
  if (a.size() != width * height || b.size() != width * height) {
    throw ContractError("ssim: plane sizes do not match the extents");
  }
  const std::vector<double> taps = gaussian_taps(params);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, width, height, taps);
  const auto mu_b = filter_valid(b, width, height, taps);
  const auto e_aa = filter_valid(aa, width, height, taps);
  const auto e_bb = filter_valid(bb, width, height, taps);
  const auto e_ab = filter_valid(ab, width, height, taps);

  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
           ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

double ssim(const ImageRGB8& a, const ImageRGB8& b, const SsimParams& params) {
  require_same_extent(a, b, "ssim");
  return ssim_plane(luma(a), luma(b), a.width, a.height, params);
}

}  // namespace srdrm
