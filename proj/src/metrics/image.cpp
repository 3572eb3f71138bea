#include "srdrm/image.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "srdrm/errors.hpp"

namespace srdrm {

namespace {

ImageRGB8 from_bgr(const cv::Mat& bgr) {
  ImageRGB8 img(static_cast<std::size_t>(bgr.cols), static_cast<std::size_t>(bgr.rows));
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
               static_cast<std::size_t>(c)) = row[x][2 - c];
      }
    }
  }
  return img;
}

cv::Mat to_bgr(const ImageRGB8& img) {
  cv::Mat bgr(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC3);
  for (int y = 0; y < bgr.rows; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        row[x][2 - c] = img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                               static_cast<std::size_t>(c));
      }
    }
  }
  return bgr;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

cv::Mat normalize_channels(const cv::Mat& raw) {
  cv::Mat bgr;
  if (raw.depth() != CV_8U) {
    throw FormatError("only 8-bit images are supported");
  }
  if (raw.channels() == 3) return raw;
  if (raw.channels() == 1) {
    bgr.create(raw.rows, raw.cols, CV_8UC3);
    cv::Mat planes[] = {raw, raw, raw};
    cv::merge(planes, 3, bgr);
    return bgr;
  }
  if (raw.channels() == 4) {
    std::vector<cv::Mat> planes;
    cv::split(raw, planes);
    planes.resize(3);
    cv::merge(planes, bgr);
    return bgr;
  }
  throw FormatError(fmt::format("unsupported channel count {}", raw.channels()));
}

}  // namespace

ImageRGB8 crop(const ImageRGB8& img, std::size_t x, std::size_t y,
               std::size_t w, std::size_t h) {
  if (w == 0 || h == 0 || x + w > img.width || y + h > img.height) {
    throw ContractError(fmt::format("crop ({}, {}, {}x{}) outside {}x{} image", x, y, w,
                                    h, img.width, img.height));
  }
  ImageRGB8 out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    std::copy_n(&img.pixels[((y + r) * img.width + x) * 3], w * 3, &out.pixels[r * w * 3]);
  }
  return out;
}

ImageRGB8 read_image(const std::filesystem::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError(fmt::format("cannot read image '{}'", path.string()));
  return from_bgr(normalize_channels(raw));
}

void write_image(const ImageRGB8& img, const std::filesystem::path& path,
                 int jpeg_quality) {
  std::vector<int> params;
  const std::string ext = lower_extension(path);
  if (ext == ".jpg" || ext == ".jpeg") {
    params = {cv::IMWRITE_JPEG_QUALITY, jpeg_quality};
  } else if (ext == ".png") {
    params = {cv::IMWRITE_PNG_COMPRESSION, 6};
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), to_bgr(img), params);
  } catch (const cv::Exception& e) {
    throw IoError(fmt::format("cannot write image '{}': {}", path.string(), e.what()));
  }
  if (!ok) throw IoError(fmt::format("cannot write image '{}'", path.string()));
}

std::vector<std::uint8_t> encode_jpeg(const ImageRGB8& img, int quality) {
  if (quality < 1 || quality > 100) {
    throw ContractError(fmt::format("jpeg quality must be in [1, 100], got {}", quality));
  }
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".jpg", to_bgr(img), bytes, {cv::IMWRITE_JPEG_QUALITY, quality})) {
    throw IoError("jpeg encoding failed");
  }
  return bytes;
}

ImageRGB8 decode_image(std::span<const std::uint8_t> bytes) {
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U,
                    const_cast<std::uint8_t*>(bytes.data()));
  const cv::Mat raw = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw FormatError("cannot decode image bytes");
  return from_bgr(normalize_channels(raw));
}

bool is_image_file(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

}  // namespace srdrm
