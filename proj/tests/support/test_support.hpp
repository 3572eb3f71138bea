#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "srdrm/datakit.hpp"
#include "srdrm/image.hpp"
#include "srdrm/ops.hpp"
#include "srdrm/random.hpp"
#include "srdrm/tensor.hpp"

namespace srdrm::testing {

template <typename T>
Tensor4<T> random_tensor(Shape4 shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4<T> t(shape);
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Values in [-hi, -gap] U [gap, hi]; keeps finite differences away from ReLU kinks.
inline Tensor4<double> random_away_from_zero(Shape4 shape, Rng& rng, double gap = 0.05,
                                             double hi = 1.0) {
  Tensor4<double> t(shape);
  for (double& v : t.values()) {
    const double mag = rng.uniform(gap, hi);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

inline double weighted_sum(const Tensor4<double>& t, const Tensor4<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t.data()[i] * w.data()[i];
  return s;
}

// Direct definitions, one output element at a time.
template <typename T>
Tensor4<T> naive_conv2d(const Tensor4<T>& x, const ConvParams<T>& p) {
  const Shape4& s = x.shape();
  const std::size_t k = p.kernel_h();
  const long oh = (static_cast<long>(s.h) + p.padding.begin + p.padding.end - static_cast<long>(k)) /
                      p.stride + 1;
  const long ow = (static_cast<long>(s.w) + p.padding.begin + p.padding.end - static_cast<long>(k)) /
                      p.stride + 1;
  Tensor4<T> out({s.n, p.out_channels(), static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < p.out_channels(); ++o)
      for (long y = 0; y < oh; ++y)
        for (long xx = 0; xx < ow; ++xx) {
          double acc = p.bias[o];
          for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = y * p.stride + static_cast<long>(ky) - p.padding.begin;
                const long ix = xx * p.stride + static_cast<long>(kx) - p.padding.begin;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(s.h) || ix >= static_cast<long>(s.w))
                  continue;
                acc += static_cast<double>(p.weights(o, c, ky, kx)) *
                       static_cast<double>(x(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)));
              }
          out(n, o, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = static_cast<T>(acc);
        }
  return out;
}

// Scatter form: each input pixel adds a weighted kernel onto the output.
template <typename T>
Tensor4<T> naive_deconv2d(const Tensor4<T>& x, const ConvParams<T>& p) {
  const Shape4& s = x.shape();
  const std::size_t k = p.kernel_h();
  const long oh = p.stride * (static_cast<long>(s.h) - 1) + static_cast<long>(k) - p.padding.begin -
                  p.padding.end;
  const long ow = p.stride * (static_cast<long>(s.w) - 1) + static_cast<long>(k) - p.padding.begin -
                  p.padding.end;
  std::vector<double> acc(s.n * p.out_channels() * static_cast<std::size_t>(oh * ow), 0.0);
  auto at = [&](std::size_t n, std::size_t o, long y, long xx) -> double& {
    return acc[((n * p.out_channels() + o) * static_cast<std::size_t>(oh) + static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(ow) +
               static_cast<std::size_t>(xx)];
  };
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < p.out_channels(); ++o)
      for (long y = 0; y < oh; ++y)
        for (long xx = 0; xx < ow; ++xx) at(n, o, y, xx) = p.bias[o];
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t iy = 0; iy < s.h; ++iy)
        for (std::size_t ix = 0; ix < s.w; ++ix)
          for (std::size_t o = 0; o < p.out_channels(); ++o)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long y = static_cast<long>(iy) * p.stride + static_cast<long>(ky) - p.padding.begin;
                const long xx = static_cast<long>(ix) * p.stride + static_cast<long>(kx) - p.padding.begin;
                if (y < 0 || xx < 0 || y >= oh || xx >= ow) continue;
                at(n, o, y, xx) += static_cast<double>(p.weights(o, c, ky, kx)) *
                                   static_cast<double>(x(n, c, iy, ix));
              }
  Tensor4<T> out({s.n, p.out_channels(), static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = static_cast<T>(acc[i]);
  return out;
}

// Smooth synthetic scene: low-frequency color gradients plus a few soft blobs.
inline ImageRGB8 smooth_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(60.0, 190.0);
    gx[c] = rng.uniform(-50.0, 50.0);
    gy[c] = rng.uniform(-50.0, 50.0);
  }
  const double cx = rng.uniform(0.2, 0.8), cy = rng.uniform(0.2, 0.8);
  const double amp = rng.uniform(-40.0, 40.0);
  ImageRGB8 img(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
      const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
      const double blob = amp * std::exp(-((u - cx) * (u - cx) + (v - cy) * (v - cy)) / 0.08);
      for (std::size_t c = 0; c < 3; ++c) {
        const double val = base[c] + gx[c] * (u - 0.5) + gy[c] * (v - 0.5) + blob;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
    }
  }
  return img;
}

// Writes `count` HR images of w x h and their bicubic 1/scale LR copies under
// root, plus a manifest with every pair in the train split.
inline DatasetManifest synthetic_dataset(const std::filesystem::path& root, std::size_t count,
                                         std::size_t lr_w, std::size_t lr_h, int scale,
                                         std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "train" / "hr");
  const std::string lr_dir = "lr_x" + std::to_string(scale);
  fs::create_directories(root / "train" / lr_dir);
  DatasetManifest m;
  m.root = root;
  m.scales = {scale};
  m.seed = seed;
  auto& pairs = m.splits[Split::train];
  for (std::size_t i = 0; i < count; ++i) {
    const std::string id = "s" + std::to_string(100 + i);
    const ImageRGB8 hr = smooth_image(lr_w * static_cast<std::size_t>(scale),
                                      lr_h * static_cast<std::size_t>(scale), seed * 1000 + i);
    const ImageRGB8 lr = resize_bicubic(hr, lr_w, lr_h);
    ManifestPair p;
    p.id = id;
    p.hr = "train/hr/" + id + ".png";
    p.lr[scale] = "train/" + lr_dir + "/" + id + ".png";
    write_image(hr, root / p.hr);
    write_image(lr, root / p.lr[scale]);
    pairs.push_back(p);
  }
  write_manifest(m);
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()) ^
            static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
    path_ = std::filesystem::temp_directory_path() /
            ("srdrm_" + tag + "_" + std::to_string(rng.next_u64() % 1000000007ULL));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace srdrm::testing
