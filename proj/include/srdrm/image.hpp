#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace srdrm {

// 8-bit RGB image, row-major, channels interleaved.
struct ImageRGB8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  ImageRGB8() = default;
  ImageRGB8(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h * 3, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }

  bool operator==(const ImageRGB8&) const = default;
};

// Crop [x, x + w) x [y, y + h); ContractError when outside the image.
ImageRGB8 crop(const ImageRGB8& img, std::size_t x, std::size_t y,
               std::size_t w, std::size_t h);

// PNG / JPEG / BMP via the file extension. IoError when unreadable.
ImageRGB8 read_image(const std::filesystem::path& path);
void write_image(const ImageRGB8& img, const std::filesystem::path& path,
                 int jpeg_quality = 95);

std::vector<std::uint8_t> encode_jpeg(const ImageRGB8& img, int quality);
ImageRGB8 decode_image(std::span<const std::uint8_t> bytes);

// Extension check only: .png, .jpg, .jpeg or .bmp (case-insensitive).
bool is_image_file(const std::filesystem::path& path);

}  // namespace srdrm
