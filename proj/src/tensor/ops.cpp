#include "srdrm/ops.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srdrm/errors.hpp"

namespace srdrm {

namespace {

using Index = std::ptrdiff_t;

// Source indices i in [lo, hi) with i * stride + offset inside
// [0, target_extent).
struct Range {
  Index lo = 0;
  Index hi = 0;
};

Range valid_range(Index target_extent, Index count, Index offset,
                  Index stride) {
  Range r;
  r.lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const Index last = target_extent - 1 - offset;
  r.hi = last < 0 ? 0 : std::min(count, last / stride + 1);
  if (r.lo > r.hi) r.lo = r.hi;
  return r;
}

template <typename T>
void check_conv_params(const ConvParams<T>& p, const char* op) {
  const Shape4& w = p.weights.shape();
  if (p.bias.size() != w.n) {
    throw ContractError(fmt::format("{}: bias length {} != out channels {}", op,
                                    p.bias.size(), w.n));
  }
  if (p.stride < 1) {
    throw ConfigError(fmt::format("{}: stride must be >= 1, got {}", op, p.stride));
  }
  if (p.padding.begin < 0 || p.padding.end < 0) {
    throw ConfigError(fmt::format("{}: negative padding", op));
  }
  if (w.h == 0 || w.w == 0) {
    throw ConfigError(fmt::format("{}: empty kernel {}", op, w.to_string()));
  }
}

template <typename T>
void check_input_channels(const Tensor4<T>& input, const ConvParams<T>& p,
                          const char* op) {
  if (input.shape().c != p.in_channels()) {
    throw ContractError(fmt::format(
        "{}: input {} has {} channels but weights {} expect {}", op,
        input.shape().to_string(), input.shape().c,
        p.weights.shape().to_string(), p.in_channels()));
  }
}

template <typename T>
void sum_planes_into(const Tensor4<T>& t, std::vector<T>& out) {
  const Shape4& s = t.shape();
  out.assign(s.c, T{});
  for (std::size_t c = 0; c < s.c; ++c) {
    T acc{};
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = t.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
    }
    out[c] = acc;
  }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, int stride,
                               Padding pad) {
  const Index span = static_cast<Index>(in) + pad.begin + pad.end -
                     static_cast<Index>(kernel);
  if (stride < 1 || span < 0) {
    throw ConfigError(fmt::format(
        "conv output extent is non-positive (in {}, kernel {}, stride {}, "
        "padding {}+{})",
        in, kernel, stride, pad.begin, pad.end));
  }
  return static_cast<std::size_t>(span / stride + 1);
}

std::size_t deconv_output_extent(std::size_t in, std::size_t kernel,
                                 int stride, Padding pad) {
  const Index out = static_cast<Index>(stride) * (static_cast<Index>(in) - 1) +
                    static_cast<Index>(kernel) - pad.begin - pad.end;
  if (in == 0 || stride < 1 || out < 1) {
    throw ConfigError(fmt::format(
        "deconv output extent is non-positive (in {}, kernel {}, stride {}, "
        "padding {}+{})",
        in, kernel, stride, pad.begin, pad.end));
  }
  return static_cast<std::size_t>(out);
}

// ---------------------------------------------------------------------------
// Convolution kernels
//
// Both ops relate a "small" grid to a "big" grid through
//   big = small * stride + k - pad_begin
// (conv2d: small = output, big = input; deconv2d: small = input, big =
// output). Every kernel below is one of three row primitives on that
// relation: gather into small rows, scatter into big rows, or a dot product
// of a small row with a big row. Strided big rows are split into column
// phases so every inner loop runs over contiguous memory.

namespace {

// Column-phase layout of the big grid: row y, phase q holds columns
// s * m + q for m in [0, wq).
template <typename T>
struct PhasedPlanes {
  std::vector<T> storage;
  const T* base = nullptr;
  Index h = 0, wq = 0, s = 1, plane_stride = 0;

  const T* row(Index plane, Index y, Index q) const {
    return base + plane * plane_stride + (y * s + q) * wq;
  }
};

template <typename T>
PhasedPlanes<T> phase_split(const Tensor4<T>& t, Index s) {
  const Shape4& sh = t.shape();
  PhasedPlanes<T> p;
  p.h = static_cast<Index>(sh.h);
  p.s = s;
  const Index w = static_cast<Index>(sh.w);
  if (s == 1) {
    p.wq = w;
    p.plane_stride = p.h * w;
    p.base = t.data();
    return p;
  }
  p.wq = (w + s - 1) / s;
  p.plane_stride = p.h * s * p.wq;
  const Index planes = static_cast<Index>(sh.n * sh.c);
  p.storage.assign(static_cast<std::size_t>(planes * p.plane_stride), T{});
#pragma omp parallel for schedule(static)
  for (Index pl = 0; pl < planes; ++pl) {
    const T* src = t.data() + pl * p.h * w;
    T* dst = p.storage.data() + pl * p.plane_stride;
    for (Index y = 0; y < p.h; ++y) {
      for (Index x = 0; x < w; ++x) dst[(y * s + x % s) * p.wq + x / s] = src[y * w + x];
    }
  }
  p.base = p.storage.data();
  return p;
}

// Tap offset d = k - pad_begin written as s * r + q with 0 <= q < s.
struct TapPhase {
  Index q = 0;
  Index r = 0;
};

TapPhase tap_phase(Index d, Index s) {
  const Index q = ((d % s) + s) % s;
  return {q, (d - q) / s};
}

struct Geometry {
  Index n = 0;
  Index small_c = 0, small_h = 0, small_w = 0;
  Index big_c = 0, big_h = 0, big_w = 0;
  Index kh = 0, kw = 0, s = 1, pb = 0;
  // Weight offset of (small channel a, big channel b) is a * wa + b * wb.
  Index wa = 0, wb = 0;
};

// Output channels handled per pass over an input row.
constexpr Index kChannelBlock = 4;

// o[j][x] += w[j] * in[x] for j < kChannelBlock.
template <typename T>
void axpy_block(T* __restrict o0, T* __restrict o1, T* __restrict o2, T* __restrict o3,
                const T* __restrict in, const T* w, Index lo, Index hi) {
  const T w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3];
  for (Index x = lo; x < hi; ++x) {
    const T v = in[x];
    o0[x] += w0 * v;
    o1[x] += w1 * v;
    o2[x] += w2 * v;
    o3[x] += w3 * v;
  }
}

template <typename T>
void axpy(T* __restrict out, const T* __restrict in, T w, Index lo, Index hi) {
  for (Index x = lo; x < hi; ++x) out[x] += w * in[x];
}

struct ColumnTap {
  Range range;
  TapPhase phase;
};

std::vector<ColumnTap> column_taps(const Geometry& g) {
  std::vector<ColumnTap> taps(static_cast<std::size_t>(g.kw));
  for (Index kx = 0; kx < g.kw; ++kx) {
    taps[static_cast<std::size_t>(kx)] = {valid_range(g.big_w, g.small_w, kx - g.pb, g.s),
                                          tap_phase(kx - g.pb, g.s)};
  }
  return taps;
}

// small[n, a] (pre-initialized) += sum_b,ky,kx w(a, b, ky, kx) * big[...].
template <typename T>
void gather_small(const Geometry& g, const PhasedPlanes<T>& big, const T* weights,
                  Tensor4<T>& small) {
  const std::vector<ColumnTap> taps = column_taps(g);
  const Index blocks = (g.small_c + kChannelBlock - 1) / kChannelBlock;
#pragma omp parallel for schedule(static)
  for (Index job = 0; job < g.n * blocks; ++job) {
    const Index n = job / blocks, a0 = (job % blocks) * kChannelBlock;
    const Index na = std::min(kChannelBlock, g.small_c - a0);
    T* dst[kChannelBlock];
    for (Index j = 0; j < na; ++j) {
      dst[j] = small.plane(static_cast<std::size_t>(n), static_cast<std::size_t>(a0 + j));
    }
    T wv[kChannelBlock];
    for (Index y = 0; y < g.small_h; ++y) {
      const Index off = y * g.small_w;
      for (Index b = 0; b < g.big_c; ++b) {
        for (Index ky = 0; ky < g.kh; ++ky) {
          const Index by = y * g.s + ky - g.pb;
          if (by < 0 || by >= g.big_h) continue;
          for (Index kx = 0; kx < g.kw; ++kx) {
            const ColumnTap& t = taps[static_cast<std::size_t>(kx)];
            const T* in_row = big.row(n * g.big_c + b, by, t.phase.q) + t.phase.r;
            const Index k = ky * g.kw + kx;
            if (na == kChannelBlock) {
              for (Index j = 0; j < kChannelBlock; ++j) wv[j] = weights[(a0 + j) * g.wa + b * g.wb + k];
              axpy_block(dst[0] + off, dst[1] + off, dst[2] + off, dst[3] + off, in_row, wv,
                         t.range.lo, t.range.hi);
            } else {
              for (Index j = 0; j < na; ++j) {
                axpy(dst[j] + off, in_row, weights[(a0 + j) * g.wa + b * g.wb + k], t.range.lo,
                     t.range.hi);
              }
            }
          }
        }
      }
    }
  }
}

// big[n, a] = init(a) + sum_b,ky,kx w(a, b, ky, kx) * small[...] scattered.
template <typename T, typename Init>
void scatter_big(const Geometry& g, const Tensor4<T>& small, const T* weights, Init init,
                 Tensor4<T>& big) {
  const Index wq = (g.big_w + g.s - 1) / g.s;
  const Index row_len = g.s * wq;
  const std::vector<ColumnTap> taps = column_taps(g);
  const Index blocks = (g.big_c + kChannelBlock - 1) / kChannelBlock;
#pragma omp parallel for schedule(static)
  for (Index job = 0; job < g.n * blocks; ++job) {
    const Index n = job / blocks, a0 = (job % blocks) * kChannelBlock;
    const Index na = std::min(kChannelBlock, g.big_c - a0);
    std::vector<T> acc(static_cast<std::size_t>(kChannelBlock * row_len));
    T* rows[kChannelBlock];
    for (Index j = 0; j < kChannelBlock; ++j) rows[j] = acc.data() + j * row_len;
    T wv[kChannelBlock];
    for (Index y = 0; y < g.big_h; ++y) {
      for (Index j = 0; j < na; ++j) std::fill(rows[j], rows[j] + row_len, init(a0 + j));
      for (Index b = 0; b < g.small_c; ++b) {
        const T* src = small.plane(static_cast<std::size_t>(n), static_cast<std::size_t>(b));
        for (Index ky = 0; ky < g.kh; ++ky) {
          const Index num = y + g.pb - ky;
          if (num < 0 || num % g.s != 0) continue;
          const Index sy = num / g.s;
          if (sy >= g.small_h) continue;
          const T* in_row = src + sy * g.small_w;
          for (Index kx = 0; kx < g.kw; ++kx) {
            const ColumnTap& t = taps[static_cast<std::size_t>(kx)];
            const Index off = t.phase.q * wq + t.phase.r;
            const Index k = ky * g.kw + kx;
            if (na == kChannelBlock) {
              for (Index j = 0; j < kChannelBlock; ++j) wv[j] = weights[(a0 + j) * g.wa + b * g.wb + k];
              axpy_block(rows[0] + off, rows[1] + off, rows[2] + off, rows[3] + off, in_row, wv,
                         t.range.lo, t.range.hi);
            } else {
              for (Index j = 0; j < na; ++j) {
                axpy(rows[j] + off, in_row, weights[(a0 + j) * g.wa + b * g.wb + k], t.range.lo,
                     t.range.hi);
              }
            }
          }
        }
      }
      for (Index j = 0; j < na; ++j) {
        T* out_row = big.plane(static_cast<std::size_t>(n), static_cast<std::size_t>(a0 + j)) +
                     y * g.big_w;
        for (Index x = 0; x < g.big_w; ++x) out_row[x] = rows[j][(x % g.s) * wq + x / g.s];
      }
    }
  }
}

// Fixed eight-lane partial sums: vectorizes without reassociation flags and
// keeps the summation order independent of the target.
template <typename T>
T dot(const T* a, const T* b, Index lo, Index hi) {
  constexpr Index kLanes = 8;
  T lanes[kLanes] = {};
  Index x = lo;
  for (; x + kLanes <= hi; x += kLanes) {
    for (Index l = 0; l < kLanes; ++l) lanes[l] += a[x + l] * b[x + l];
  }
  T sum{};
  for (; x < hi; ++x) sum += a[x] * b[x];
  for (Index l = 0; l < kLanes; ++l) sum += lanes[l];
  return sum;
}

// dw(a, b, ky, kx) = sum_n,y,x small[n, a][y, x] * big[n, b][...].
template <typename T>
void dot_weights(const Geometry& g, const Tensor4<T>& small, const PhasedPlanes<T>& big,
                 Tensor4<T>& d_weights) {
  const Index kk = g.kh * g.kw;
  const std::vector<ColumnTap> taps = column_taps(g);
#pragma omp parallel for schedule(static)
  for (Index job = 0; job < g.small_c * g.big_c; ++job) {
    const Index a = job / g.big_c, b = job % g.big_c;
    std::vector<T> acc(static_cast<std::size_t>(kk), T{});
    for (Index n = 0; n < g.n; ++n) {
      const T* src = small.plane(static_cast<std::size_t>(n), static_cast<std::size_t>(a));
      for (Index y = 0; y < g.small_h; ++y) {
        const T* s_row = src + y * g.small_w;
        for (Index ky = 0; ky < g.kh; ++ky) {
          const Index by = y * g.s + ky - g.pb;
          if (by < 0 || by >= g.big_h) continue;
          for (Index kx = 0; kx < g.kw; ++kx) {
            const ColumnTap& t = taps[static_cast<std::size_t>(kx)];
            const T* b_row = big.row(n * g.big_c + b, by, t.phase.q) + t.phase.r;
            acc[static_cast<std::size_t>(ky * g.kw + kx)] +=
                dot(s_row, b_row, t.range.lo, t.range.hi);
          }
        }
      }
    }
    T* dw = d_weights.data() + a * g.wa + b * g.wb;
    for (Index k = 0; k < kk; ++k) dw[k] = acc[static_cast<std::size_t>(k)];
  }
}

template <typename T>
Geometry conv_geometry(const Tensor4<T>& input, const ConvParams<T>& params,
                       std::size_t oh, std::size_t ow) {
  const Shape4& is = input.shape();
  Geometry g;
  g.n = static_cast<Index>(is.n);
  g.small_c = static_cast<Index>(params.out_channels());
  g.small_h = static_cast<Index>(oh);
  g.small_w = static_cast<Index>(ow);
  g.big_c = static_cast<Index>(is.c);
  g.big_h = static_cast<Index>(is.h);
  g.big_w = static_cast<Index>(is.w);
  g.kh = static_cast<Index>(params.kernel_h());
  g.kw = static_cast<Index>(params.kernel_w());
  g.s = params.stride;
  g.pb = params.padding.begin;
  g.wa = g.big_c * g.kh * g.kw;  // small channel = output channel o
  g.wb = g.kh * g.kw;
  return g;
}

template <typename T>
Geometry deconv_geometry(const Tensor4<T>& input, const ConvParams<T>& params,
                         std::size_t oh, std::size_t ow) {
  const Shape4& is = input.shape();
  Geometry g;
  g.n = static_cast<Index>(is.n);
  g.small_c = static_cast<Index>(is.c);
  g.small_h = static_cast<Index>(is.h);
  g.small_w = static_cast<Index>(is.w);
  g.big_c = static_cast<Index>(params.out_channels());
  g.big_h = static_cast<Index>(oh);
  g.big_w = static_cast<Index>(ow);
  g.kh = static_cast<Index>(params.kernel_h());
  g.kw = static_cast<Index>(params.kernel_w());
  g.s = params.stride;
  g.pb = params.padding.begin;
  g.wa = g.kh * g.kw;  // small channel = input channel c
  g.wb = g.small_c * g.kh * g.kw;
  return g;
}

// The same geometry seen from the other side of the weight tensor.
Geometry swap_weight_roles(Geometry g) {
  std::swap(g.wa, g.wb);
  return g;
}

}  // namespace

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& input, const ConvParams<T>& params) {
  check_conv_params(params, "conv2d");
  check_input_channels(input, params, "conv2d");
  const Shape4& is = input.shape();
  const std::size_t oh = conv_output_extent(is.h, params.kernel_h(), params.stride, params.padding);
  const std::size_t ow = conv_output_extent(is.w, params.kernel_w(), params.stride, params.padding);
  const Geometry g = conv_geometry(input, params, oh, ow);

  Tensor4<T> out({is.n, params.out_channels(), oh, ow});
  for (std::size_t n = 0; n < is.n; ++n) {
    for (std::size_t o = 0; o < params.out_channels(); ++o) {
      std::fill_n(out.plane(n, o), oh * ow, params.bias[o]);
    }
  }
  gather_small(g, phase_split(input, g.s), params.weights.data(), out);
  return out;
}

template <typename T>
ConvGradients<T> conv2d_backward(const Tensor4<T>& input,
                                 const ConvParams<T>& params,
                                 const Tensor4<T>& upstream,
                                 bool need_input_grad) {
  check_conv_params(params, "conv2d_backward");
  check_input_channels(input, params, "conv2d_backward");
  const Shape4& is = input.shape();
  const std::size_t oh = conv_output_extent(is.h, params.kernel_h(), params.stride, params.padding);
  const std::size_t ow = conv_output_extent(is.w, params.kernel_w(), params.stride, params.padding);
  require_same_shape(upstream.shape(), {is.n, params.out_channels(), oh, ow},
                     "conv2d_backward upstream");
  const Geometry g = conv_geometry(input, params, oh, ow);

  ConvGradients<T> grads;
  if (need_input_grad) {
    grads.d_input = Tensor4<T>(is);
    scatter_big(swap_weight_roles(g), upstream, params.weights.data(),
                [](Index) { return T{}; }, grads.d_input);
  }
  grads.d_weights = Tensor4<T>(params.weights.shape());
  dot_weights(g, upstream, phase_split(input, g.s), grads.d_weights);
  sum_planes_into(upstream, grads.d_bias);
  return grads;
}

template <typename T>
Tensor4<T> conv2d_backward_input(const Tensor4<T>& input, const ConvParams<T>& params,
                                 const Tensor4<T>& upstream) {
  check_conv_params(params, "conv2d_backward_input");
  check_input_channels(input, params, "conv2d_backward_input");
  const Shape4& is = input.shape();
  const std::size_t oh = conv_output_extent(is.h, params.kernel_h(), params.stride, params.padding);
  const std::size_t ow = conv_output_extent(is.w, params.kernel_w(), params.stride, params.padding);
  require_same_shape(upstream.shape(), {is.n, params.out_channels(), oh, ow},
                     "conv2d_backward_input upstream");
  const Geometry g = conv_geometry(input, params, oh, ow);
  Tensor4<T> d_input(is);
  scatter_big(swap_weight_roles(g), upstream, params.weights.data(), [](Index) { return T{}; },
              d_input);
  return d_input;
}

template <typename T>
Tensor4<T> deconv2d(const Tensor4<T>& input, const ConvParams<T>& params) {
  check_conv_params(params, "deconv2d");
  check_input_channels(input, params, "deconv2d");
  const Shape4& is = input.shape();
  const std::size_t oh = deconv_output_extent(is.h, params.kernel_h(), params.stride, params.padding);
  const std::size_t ow = deconv_output_extent(is.w, params.kernel_w(), params.stride, params.padding);
  const Geometry g = deconv_geometry(input, params, oh, ow);

  Tensor4<T> out({is.n, params.out_channels(), oh, ow});
  scatter_big(swap_weight_roles(g), input, params.weights.data(),
              [&](Index o) { return params.bias[static_cast<std::size_t>(o)]; }, out);
  return out;
}

template <typename T>
ConvGradients<T> deconv2d_backward(const Tensor4<T>& input,
                                   const ConvParams<T>& params,
                                   const Tensor4<T>& upstream,
                                   bool need_input_grad) {
  check_conv_params(params, "deconv2d_backward");
  check_input_channels(input, params, "deconv2d_backward");
  const Shape4& is = input.shape();
  const std::size_t oh = deconv_output_extent(is.h, params.kernel_h(), params.stride, params.padding);
  const std::size_t ow = deconv_output_extent(is.w, params.kernel_w(), params.stride, params.padding);
  require_same_shape(upstream.shape(), {is.n, params.out_channels(), oh, ow},
                     "deconv2d_backward upstream");
  const Geometry g = deconv_geometry(input, params, oh, ow);
  const PhasedPlanes<T> dy = phase_split(upstream, g.s);

  ConvGradients<T> grads;
  if (need_input_grad) {
    grads.d_input = Tensor4<T>(is);
    gather_small(g, dy, params.weights.data(), grads.d_input);
  }
  grads.d_weights = Tensor4<T>(params.weights.shape());
  dot_weights(g, input, dy, grads.d_weights);
  sum_planes_into(upstream, grads.d_bias);
  return grads;
}
// ---------------------------------------------------------------------------
// batch normalization

template <typename T>
BnParams<T> BnParams<T>::identity(std::size_t channels) {
  BnParams<T> p;
  p.gamma.assign(channels, T(1));
  p.beta.assign(channels, T(0));
  p.running_mean.assign(channels, T(0));
  p.running_var.assign(channels, T(1));
  return p;
}

template <typename T>
BnResult<T> batchnorm(const Tensor4<T>& input, const BnParams<T>& params,
                      BnMode mode) {
  const Shape4& s = input.shape();
  const std::size_t C = params.channels();
  if (s.c != C || params.beta.size() != C || params.running_mean.size() != C ||
      params.running_var.size() != C) {
    throw ContractError(fmt::format(
        "batchnorm: input {} has {} channels, parameters have {}",
        s.to_string(), s.c, C));
  }
  const std::size_t count = s.n * s.plane();
  if (mode == BnMode::train && count < 2) {
    throw ContractError(fmt::format(
        "batchnorm: train mode needs batch*H*W >= 2, input {}", s.to_string()));
  }

  BnResult<T> r;
  r.mode = mode;
  r.output = Tensor4<T>(s);
  r.normalized = Tensor4<T>(s);
  r.inv_std.resize(C);
  r.running_mean = params.running_mean;
  r.running_var = params.running_var;
  const double m = params.momentum;

  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == BnMode::train) {
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = input.plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) mean += p[i];
      }
      mean /= static_cast<double>(count);
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = input.plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      const double unbiased = var * static_cast<double>(count) /
                              static_cast<double>(count - 1);
      r.running_mean[c] = static_cast<T>((1.0 - m) * params.running_mean[c] + m * mean);
      r.running_var[c] = static_cast<T>((1.0 - m) * params.running_var[c] + m * unbiased);
    } else {
      mean = params.running_mean[c];
      var = params.running_var[c];
    }
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + params.epsilon));
    const T mean_t = static_cast<T>(mean);
    r.inv_std[c] = inv_std;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* src = input.plane(n, c);
      T* xhat = r.normalized.plane(n, c);
      T* dst = r.output.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        xhat[i] = (src[i] - mean_t) * inv_std;
        dst[i] = params.gamma[c] * xhat[i] + params.beta[c];
      }
    }
  }
  return r;
}

template <typename T>
BnGradients<T> batchnorm_backward(const BnResult<T>& forward,
                                  const BnParams<T>& params,
                                  const Tensor4<T>& upstream) {
  const Shape4& s = forward.normalized.shape();
  require_same_shape(upstream.shape(), s, "batchnorm_backward upstream");
  const std::size_t C = s.c;
  if (params.channels() != C) {
    throw ContractError("batchnorm_backward: channel mismatch");
  }
  const double count = static_cast<double>(s.n * s.plane());

  BnGradients<T> g;
  g.d_input = Tensor4<T>(s);
  g.d_gamma.assign(C, T{});
  g.d_beta.assign(C, T{});
  for (std::size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* dy = upstream.plane(n, c);
      const T* xhat = forward.normalized.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xhat[i];
      }
    }
    g.d_beta[c] = static_cast<T>(sum_dy);
    g.d_gamma[c] = static_cast<T>(sum_dy_xhat);

    const T scale = params.gamma[c] * forward.inv_std[c];
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* dy = upstream.plane(n, c);
      const T* xhat = forward.normalized.plane(n, c);
      T* dx = g.d_input.plane(n, c);
      if (forward.mode == BnMode::train) {
        const T mean_dy = static_cast<T>(sum_dy / count);
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          dx[i] = scale * (dy[i] - mean_dy - xhat[i] * mean_dy_xhat);
        }
      } else {
        for (std::size_t i = 0; i < s.plane(); ++i) dx[i] = scale * dy[i];
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// activations

template <typename T>
Tensor4<T> activate(const Tensor4<T>& input, Activation act) {
  Tensor4<T> out(input.shape());
  const T* x = input.data();
  T* y = out.data();
  const std::size_t count = input.size();
  const T slope = static_cast<T>(act.slope);
  switch (act.kind) {
    case ActivationKind::relu:
      for (std::size_t i = 0; i < count; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case ActivationKind::leaky_relu:
      for (std::size_t i = 0; i < count; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
      break;
    case ActivationKind::tanh:
      for (std::size_t i = 0; i < count; ++i) y[i] = std::tanh(x[i]);
      break;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < count; ++i) {
        if (x[i] >= T(0)) {
          y[i] = T(1) / (T(1) + std::exp(-x[i]));
        } else {
          const T e = std::exp(x[i]);
          y[i] = e / (T(1) + e);
        }
      }
      break;
  }
  return out;
}

template <typename T>
Tensor4<T> activate_backward(const Tensor4<T>& input, const Tensor4<T>& output,
                             Activation act, const Tensor4<T>& upstream) {
  require_same_shape(input.shape(), upstream.shape(), "activate_backward");
  require_same_shape(output.shape(), upstream.shape(), "activate_backward");
  Tensor4<T> dx(input.shape());
  const T* x = input.data();
  const T* y = output.data();
  const T* dy = upstream.data();
  T* d = dx.data();
  const std::size_t count = input.size();
  const T slope = static_cast<T>(act.slope);
  switch (act.kind) {
    case ActivationKind::relu:
      for (std::size_t i = 0; i < count; ++i) d[i] = x[i] > T(0) ? dy[i] : T(0);
      break;
    case ActivationKind::leaky_relu:
      for (std::size_t i = 0; i < count; ++i) d[i] = x[i] > T(0) ? dy[i] : slope * dy[i];
      break;
    case ActivationKind::tanh:
      for (std::size_t i = 0; i < count; ++i) d[i] = dy[i] * (T(1) - y[i] * y[i]);
      break;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < count; ++i) d[i] = dy[i] * y[i] * (T(1) - y[i]);
      break;
  }
  return dx;
}

#define SRDRM_INSTANTIATE(T)                                                   \
  template Tensor4<T> conv2d(const Tensor4<T>&, const ConvParams<T>&);        \
  template Tensor4<T> conv2d_backward_input(const Tensor4<T>&,                  \
                                            const ConvParams<T>&,                \
                                            const Tensor4<T>&);                  \
  template ConvGradients<T> conv2d_backward(                                   \
      const Tensor4<T>&, const ConvParams<T>&, const Tensor4<T>&, bool);       \
  template Tensor4<T> deconv2d(const Tensor4<T>&, const ConvParams<T>&);      \
  template ConvGradients<T> deconv2d_backward(                                 \
      const Tensor4<T>&, const ConvParams<T>&, const Tensor4<T>&, bool);       \
  template struct BnParams<T>;                                                 \
  template BnResult<T> batchnorm(const Tensor4<T>&, const BnParams<T>&,        \
                                 BnMode);                                      \
  template BnGradients<T> batchnorm_backward(                                  \
      const BnResult<T>&, const BnParams<T>&, const Tensor4<T>&);              \
  template Tensor4<T> activate(const Tensor4<T>&, Activation);                 \
  template Tensor4<T> activate_backward(const Tensor4<T>&, const Tensor4<T>&,  \
                                        Activation, const Tensor4<T>&);

SRDRM_INSTANTIATE(float)
SRDRM_INSTANTIATE(double)

#undef SRDRM_INSTANTIATE

}  // namespace srdrm
