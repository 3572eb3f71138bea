#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srdrm/datakit.hpp"
#include "srdrm/errors.hpp"

namespace srdrm {

namespace {

double keys_cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::size_t first = 0;  // index into offsets/weights
  std::size_t count = 0;
};

// Per output coordinate: clamped source indices and normalized weights.
struct ResampleTable {
  std::vector<Taps> taps;
  std::vector<std::size_t> index;
  std::vector<double> weight;
};

ResampleTable make_table(std::size_t in, std::size_t out) {
  ResampleTable t;
  t.taps.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  const double stretch = std::max(ratio, 1.0);
  const double support = 2.0 * stretch;
  for (std::size_t o = 0; o < out; ++o) {
    const double center = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const auto lo = static_cast<std::ptrdiff_t>(std::floor(center - support)) + 1;
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(center + support));
    t.taps[o].first = t.index.size();
    double sum = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double w = keys_cubic((static_cast<double>(j) - center) / stretch);
      if (w == 0.0) continue;
      const auto clamped = static_cast<std::size_t>(
          std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(in) - 1));
      t.index.push_back(clamped);
      t.weight.push_back(w);
      sum += w;
    }
    t.taps[o].count = t.index.size() - t.taps[o].first;
    for (std::size_t k = t.taps[o].first; k < t.index.size(); ++k) t.weight[k] /= sum;
  }
  return t;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

}  // namespace

ImageRGB8 resize_bicubic(const ImageRGB8& img, std::size_t width, std::size_t height) {
  if (img.width == 0 || img.height == 0 || width == 0 || height == 0) {
    throw ContractError(fmt::format("resize {}x{} -> {}x{}: extents must be positive",
                                    img.width, img.height, width, height));
  }
  if (img.width == width && img.height == height) return img;

  const ResampleTable tx = make_table(img.width, width);
  const ResampleTable ty = make_table(img.height, height);

  // Horizontal pass into a double buffer of height img.height.
  std::vector<double> mid(img.height * width * 3);
#pragma omp parallel for
  for (std::ptrdiff_t yi = 0; yi < static_cast<std::ptrdiff_t>(img.height); ++yi) {
    const auto y = static_cast<std::size_t>(yi);
    for (std::size_t x = 0; x < width; ++x) {
      const Taps& tp = tx.taps[x];
      double acc[3] = {0.0, 0.0, 0.0};
      for (std::size_t k = tp.first; k < tp.first + tp.count; ++k) {
        const std::uint8_t* px = &img.pixels[(y * img.width + tx.index[k]) * 3];
        for (int c = 0; c < 3; ++c) acc[c] += tx.weight[k] * px[c];
      }
      for (int c = 0; c < 3; ++c) mid[(y * width + x) * 3 + c] = acc[c];
    }
  }

  ImageRGB8 out(width, height);
#pragma omp parallel for
  for (std::ptrdiff_t yi = 0; yi < static_cast<std::ptrdiff_t>(height); ++yi) {
    const auto y = static_cast<std::size_t>(yi);
    const Taps& tp = ty.taps[y];
    for (std::size_t x = 0; x < width; ++x) {
      double acc[3] = {0.0, 0.0, 0.0};
      for (std::size_t k = tp.first; k < tp.first + tp.count; ++k) {
        const double* px = &mid[(ty.index[k] * width + x) * 3];
        for (int c = 0; c < 3; ++c) acc[c] += ty.weight[k] * px[c];
      }
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = to_u8(acc[c]);
    }
  }
  return out;
}

template <typename T>
Tensor4<T> resize_bicubic(const Tensor4<T>& t, std::size_t width, std::size_t height) {
  const Shape4& s = t.shape();
  if (s.h == 0 || s.w == 0 || width == 0 || height == 0) {
    throw ContractError(fmt::format("resize {} -> {}x{}: extents must be positive",
                                    s.to_string(), width, height));
  }
  if (s.w == width && s.h == height) return t;
  const ResampleTable tx = make_table(s.w, width);
  const ResampleTable ty = make_table(s.h, height);
  Tensor4<T> out(Shape4{s.n, s.c, height, width});
  const auto planes = static_cast<std::ptrdiff_t>(s.n * s.c);
#pragma omp parallel for
  for (std::ptrdiff_t pi = 0; pi < planes; ++pi) {
    const auto n = static_cast<std::size_t>(pi) / s.c;
    const auto c = static_cast<std::size_t>(pi) % s.c;
    const T* src = t.plane(n, c);
    std::vector<double> mid(s.h * width);
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const Taps& tp = tx.taps[x];
        double acc = 0.0;
        for (std::size_t k = tp.first; k < tp.first + tp.count; ++k) {
          acc += tx.weight[k] * static_cast<double>(src[y * s.w + tx.index[k]]);
        }
        mid[y * width + x] = acc;
      }
    }
    T* dst = out.plane(n, c);
    for (std::size_t y = 0; y < height; ++y) {
      const Taps& tp = ty.taps[y];
      for (std::size_t x = 0; x < width; ++x) {
        double acc = 0.0;
        for (std::size_t k = tp.first; k < tp.first + tp.count; ++k) {
          acc += ty.weight[k] * mid[ty.index[k] * width + x];
        }
        dst[y * width + x] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

template Tensor4<float> resize_bicubic(const Tensor4<float>&, std::size_t, std::size_t);
template Tensor4<double> resize_bicubic(const Tensor4<double>&, std::size_t, std::size_t);

ImageRGB8 halve(const ImageRGB8& img) {
  if (img.width < 2 || img.height < 2) {
    throw ContractError(fmt::format("cannot halve a {}x{} image", img.width, img.height));
  }
  return resize_bicubic(img, img.width / 2, img.height / 2);
}

}  // namespace srdrm
