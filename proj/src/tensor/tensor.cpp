#include "srdrm/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srdrm/errors.hpp"

namespace srdrm {

std::string Shape4::to_string() const {
  return fmt::format("({}, {}, {}, {})", n, c, h, w);
}

void require_same_shape(const Shape4& a, const Shape4& b, const char* what) {
  if (a != b) {
    throw ContractError(fmt::format("{}: shape mismatch {} vs {}", what,
                                    a.to_string(), b.to_string()));
  }
}

template <typename T>
Tensor4<T>::Tensor4(Shape4 shape, T fill)
    : shape_(shape), values_(shape.count(), fill) {}

template <typename T>
Tensor4<T>::Tensor4(Shape4 shape, std::vector<T> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.count()) {
    throw ContractError(fmt::format(
        "tensor data length {} does not match shape {} ({} elements)",
        values_.size(), shape_.to_string(), shape_.count()));
  }
}

template <typename T>
void Tensor4<T>::fill(T value) {
  std::fill(values_.begin(), values_.end(), value);
}

template <typename T>
Tensor4<T>& Tensor4<T>::operator+=(const Tensor4& other) {
  require_same_shape(shape_, other.shape_, "tensor add");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

template <typename T>
bool Tensor4<T>::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& first, const Tensor4<T>& second) {
  const Shape4& a = first.shape();
  const Shape4& b = second.shape();
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw ContractError(fmt::format("concat_channels: extent mismatch {} vs {}",
                                    a.to_string(), b.to_string()));
  }
  Tensor4<T> out({a.n, a.c + b.c, a.h, a.w});
  const std::size_t plane = a.plane();
  for (std::size_t n = 0; n < a.n; ++n) {
    std::copy_n(first.plane(n, 0), a.c * plane, out.plane(n, 0));
    std::copy_n(second.plane(n, 0), b.c * plane, out.plane(n, a.c));
  }
  return out;
}

template <typename T>
Tensor4<T> slice_channels(const Tensor4<T>& t, std::size_t begin,
                          std::size_t count) {
  const Shape4& s = t.shape();
  if (begin + count > s.c) {
    throw ContractError(fmt::format("slice_channels: [{}, {}) outside {}",
                                    begin, begin + count, s.to_string()));
  }
  Tensor4<T> out({s.n, count, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy_n(t.plane(n, begin), count * s.plane(), out.plane(n, 0));
  }
  return out;
}

template <typename T>
Tensor4<T> slice_batch(const Tensor4<T>& t, std::size_t begin,
                       std::size_t count) {
  const Shape4& s = t.shape();
  if (begin + count > s.n) {
    throw ContractError(fmt::format("slice_batch: [{}, {}) outside {}", begin,
                                    begin + count, s.to_string()));
  }
  Tensor4<T> out({count, s.c, s.h, s.w});
  std::copy_n(t.plane(begin, 0), count * s.c * s.plane(), out.data());
  return out;
}

template class Tensor4<float>;
template class Tensor4<double>;

#define SRDRM_INSTANTIATE(T)                                                  \
  template Tensor4<T> concat_channels(const Tensor4<T>&, const Tensor4<T>&); \
  template Tensor4<T> slice_channels(const Tensor4<T>&, std::size_t,          \
                                     std::size_t);                            \
  template Tensor4<T> slice_batch(const Tensor4<T>&, std::size_t, std::size_t);

SRDRM_INSTANTIATE(float)
SRDRM_INSTANTIATE(double)

#undef SRDRM_INSTANTIATE

}  // namespace srdrm
