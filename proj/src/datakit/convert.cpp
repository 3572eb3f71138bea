#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srdrm/datakit.hpp"
#include "srdrm/errors.hpp"

namespace srdrm {

template <typename T>
Tensor4<T> images_to_tensor(std::span<const ImageRGB8> images) {
  if (images.empty()) throw ContractError("images_to_tensor: no images");
  const std::size_t w = images[0].width, h = images[0].height;
  Tensor4<T> t(Shape4{images.size(), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const ImageRGB8& img = images[n];
    if (img.width != w || img.height != h) {
      throw ContractError(fmt::format("images_to_tensor: image {} is {}x{}, expected {}x{}",
                                      n, img.width, img.height, w, h));
    }
    for (std::size_t c = 0; c < 3; ++c) {
      T* dst = t.plane(n, c);
      for (std::size_t i = 0; i < w * h; ++i) {
        dst[i] = static_cast<T>(2.0 * img.pixels[3 * i + c] / 255.0 - 1.0);
      }
    }
  }
  return t;
}

template <typename T>
Tensor4<T> image_to_tensor(const ImageRGB8& img) {
  return images_to_tensor<T>(std::span<const ImageRGB8>(&img, 1));
}

template <typename T>
ImageRGB8 tensor_to_image(const Tensor4<T>& t, std::size_t index) {
  const Shape4& s = t.shape();
  if (s.c != 3 || index >= s.n) {
    throw ContractError(fmt::format("tensor_to_image: cannot take image {} of {}", index,
                                    s.to_string()));
  }
  ImageRGB8 img(s.w, s.h);
  for (std::size_t c = 0; c < 3; ++c) {
    const T* src = t.plane(index, c);
    for (std::size_t i = 0; i < s.plane(); ++i) {
      // std::round rounds half away from zero; NaN maps to 0.
      double v = std::round((static_cast<double>(src[i]) + 1.0) * 127.5);
      if (!(v >= 0.0)) v = 0.0;
      img.pixels[3 * i + c] = static_cast<std::uint8_t>(std::min(v, 255.0));
    }
  }
  return img;
}

template Tensor4<float> images_to_tensor<float>(std::span<const ImageRGB8>);
template Tensor4<double> images_to_tensor<double>(std::span<const ImageRGB8>);
template Tensor4<float> image_to_tensor<float>(const ImageRGB8&);
template Tensor4<double> image_to_tensor<double>(const ImageRGB8&);
template ImageRGB8 tensor_to_image<float>(const Tensor4<float>&, std::size_t);
template ImageRGB8 tensor_to_image<double>(const Tensor4<double>&, std::size_t);

}  // namespace srdrm
