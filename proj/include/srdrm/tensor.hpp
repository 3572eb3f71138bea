#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace srdrm {

// Extents of a (batch, channel, height, width) tensor.
struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t count() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape4&) const = default;
  std::string to_string() const;
};

// Dense row-major NCHW tensor. Value type; copies are deep.
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{});
  Tensor4(Shape4 shape, std::vector<T> values);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return values_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t y,
                      std::size_t x) const {
    return values_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }

  T* plane(std::size_t n, std::size_t c) {
    return values_.data() + (n * shape_.c + c) * shape_.plane();
  }
  const T* plane(std::size_t n, std::size_t c) const {
    return values_.data() + (n * shape_.c + c) * shape_.plane();
  }

  void fill(T value);
  Tensor4& operator+=(const Tensor4& other);

  bool all_finite() const;

  template <typename U>
  Tensor4<U> cast() const {
    std::vector<U> out(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) {
      out[i] = static_cast<U>(values_[i]);
    }
    return Tensor4<U>(shape_, std::move(out));
  }

 private:
  Shape4 shape_{};
  std::vector<T> values_;
};

// Throws ContractError naming both shapes when they differ.
void require_same_shape(const Shape4& a, const Shape4& b, const char* what);

// Channel-wise concatenation (first's channels come first).
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& first, const Tensor4<T>& second);

// Copies channels [begin, begin + count) into a new tensor.
template <typename T>
Tensor4<T> slice_channels(const Tensor4<T>& t, std::size_t begin,
                          std::size_t count);

// Batch entries [begin, begin + count).
template <typename T>
Tensor4<T> slice_batch(const Tensor4<T>& t, std::size_t begin,
                       std::size_t count);

extern template class Tensor4<float>;
extern template class Tensor4<double>;

}  // namespace srdrm
