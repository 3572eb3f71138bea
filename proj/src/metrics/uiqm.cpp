#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "srdrm/errors.hpp"
#include "srdrm/metrics.hpp"

namespace srdrm {

namespace {

struct TrimmedStats {
  double mean = 0.0;
  double variance = 0.0;
};

// Mean over the sorted values with ceil(a K) dropped from the bottom and
// floor(a K) from the top; variance is about that mean over all samples.
TrimmedStats alpha_trimmed(std::vector<double> values, double trim) {
  const std::size_t k = values.size();
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const auto low = static_cast<std::size_t>(std::ceil(trim * static_cast<double>(k)));
  const auto high = static_cast<std::size_t>(std::floor(trim * static_cast<double>(k)));
  TrimmedStats s;
  if (low + high >= k) return s;
  double sum = 0.0;
  for (std::size_t i = low; i < k - high; ++i) sum += sorted[i];
  s.mean = sum / static_cast<double>(k - low - high);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.variance = sq / static_cast<double>(k);
  return s;
}

double uicm(const ImageRGB8& img, double trim) {
  const std::size_t n = img.width * img.height;
  std::vector<double> rg(n), yb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.pixels[3 * i];
    const double g = img.pixels[3 * i + 1];
    const double b = img.pixels[3 * i + 2];
    rg[i] = r - g;
    yb[i] = 0.5 * (r + g) - b;
  }
  const TrimmedStats srg = alpha_trimmed(std::move(rg), trim);
  const TrimmedStats syb = alpha_trimmed(std::move(yb), trim);
  return -0.0268 * std::sqrt(srg.mean * srg.mean + syb.mean * syb.mean) +
         0.1586 * std::sqrt(srg.variance + syb.variance);
}

// Sobel gradient magnitude with replicated borders.
std::vector<double> sobel_magnitude(const std::vector<double>& plane, std::size_t w,
                                    std::size_t h) {
  std::vector<double> out(w * h);
  auto at = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    return plane[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  for (std::size_t yy = 0; yy < h; ++yy) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      const auto x = static_cast<std::ptrdiff_t>(xx);
      const auto y = static_cast<std::ptrdiff_t>(yy);
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      out[yy * w + xx] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

// EME: 2 / (k1 k2) * sum over blocks of log(max / min); blocks with a zero
// minimum are skipped. Partial blocks at the right/bottom edge are ignored.
double eme(const std::vector<double>& plane, std::size_t w, std::size_t h,
           std::size_t block) {
  const std::size_t k1 = h / block;
  const std::size_t k2 = w / block;
  double sum = 0.0;
  for (std::size_t by = 0; by < k1; ++by) {
    for (std::size_t bx = 0; bx < k2; ++bx) {
      double lo = plane[by * block * w + bx * block];
      double hi = lo;
      for (std::size_t y = by * block; y < (by + 1) * block; ++y) {
        for (std::size_t x = bx * block; x < (bx + 1) * block; ++x) {
          lo = std::min(lo, plane[y * w + x]);
          hi = std::max(hi, plane[y * w + x]);
        }
      }
      if (lo > 0.0) sum += std::log(hi / lo);
    }
  }
  return 2.0 / static_cast<double>(k1 * k2) * sum;
}

double uism(const ImageRGB8& img, std::size_t block) {
  const std::size_t w = img.width, h = img.height;
  constexpr double kWeights[3] = {0.299, 0.587, 0.114};
  double total = 0.0;
  std::vector<double> plane(w * h);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < w * h; ++i) plane[i] = img.pixels[3 * i + c];
    std::vector<double> edges = sobel_magnitude(plane, w, h);
    for (std::size_t i = 0; i < w * h; ++i) edges[i] *= plane[i];
    total += kWeights[c] * eme(edges, w, h, block);
  }
  return total;
}

// Log-AMEE over block x block x 3 cubes.
double uiconm(const ImageRGB8& img, std::size_t block) {
  const std::size_t w = img.width, h = img.height;
  const std::size_t k1 = h / block;
  const std::size_t k2 = w / block;
  double sum = 0.0;
  for (std::size_t by = 0; by < k1; ++by) {
    for (std::size_t bx = 0; bx < k2; ++bx) {
      double lo = 255.0, hi = 0.0;
      for (std::size_t y = by * block; y < (by + 1) * block; ++y) {
        for (std::size_t x = bx * block; x < (bx + 1) * block; ++x) {
          for (std::size_t c = 0; c < 3; ++c) {
            const double v = img.at(x, y, c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
        }
      }
      const double top = hi - lo;
      const double bot = hi + lo;
      if (top <= 0.0 || bot <= 0.0) continue;
      const double ratio = top / bot;
      sum += ratio * std::log(ratio);
    }
  }
  return -sum / static_cast<double>(k1 * k2);
}

}  // namespace

UiqmResult uiqm(const ImageRGB8& img, const UiqmParams& params) {
  if (params.block == 0 || img.width < params.block || img.height < params.block) {
    throw ContractError(fmt::format("uiqm: image {}x{} is smaller than one {}x{} block",
                                    img.width, img.height, params.block, params.block));
  }
  if (!(params.c1 > 0.0 && params.c2 > 0.0 && params.c3 > 0.0)) {
    throw ContractError("uiqm: weights must be positive");
  }
  if (!(params.trim >= 0.0 && params.trim < 0.5)) {
    throw ContractError(fmt::format("uiqm: trim fraction {} outside [0, 0.5)", params.trim));
  }
  UiqmResult r;
  r.uicm = uicm(img, params.trim);
  r.uism = uism(img, params.block);
  r.uiconm = uiconm(img, params.block);
  r.uiqm = params.c1 * r.uicm + params.c2 * r.uism + params.c3 * r.uiconm;
  return r;
}

}  // namespace srdrm
