#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srdrm/image.hpp"
#include "srdrm/tensor.hpp"

namespace srdrm {

// Separable Keys bicubic (a = -0.5) with pixel-center alignment and clamped
// borders. When shrinking, the kernel is stretched by the scale factor so the
// result is antialiased.
ImageRGB8 resize_bicubic(const ImageRGB8& img, std::size_t width, std::size_t height);

// Same kernel applied to every (n, c) plane of a tensor; values are not
// clamped.
template <typename T>
Tensor4<T> resize_bicubic(const Tensor4<T>& t, std::size_t width, std::size_t height);

// One 2x bicubic halving; odd extents round down.
ImageRGB8 halve(const ImageRGB8& img);

// [0, 255] -> [-1, 1] as 2 p / 255 - 1.
template <typename T>
Tensor4<T> images_to_tensor(std::span<const ImageRGB8> images);
template <typename T>
Tensor4<T> image_to_tensor(const ImageRGB8& img);

// Inverse map (v + 1) * 127.5, rounded half away from zero, clamped to
// [0, 255]. Needs 3 channels.
template <typename T>
ImageRGB8 tensor_to_image(const Tensor4<T>& t, std::size_t index = 0);

inline constexpr std::size_t kHrWidth = 640;
inline constexpr std::size_t kHrHeight = 480;
inline constexpr int kDefaultJpegQuality = 85;

enum class Split { train, val, test };
std::string split_name(Split split);
Split parse_split(const std::string& name);  // ContractError when unknown

struct ManifestPair {
  std::string id;
  std::string hr;                 // relative to the manifest root
  std::map<int, std::string> lr;  // scale -> relative path

  bool operator==(const ManifestPair&) const = default;
};

// Dataset index. Paths are relative to `root`, the directory holding the
// manifest file.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<int> scales;
  int jpeg_quality = kDefaultJpegQuality;
  std::uint64_t seed = 0;
  std::map<Split, std::vector<ManifestPair>> splits;
  std::vector<std::string> rejects;  // inputs skipped as unreadable

  const std::vector<ManifestPair>& pairs(Split split) const;  // empty if absent
  bool has_scale(int scale) const;
};

inline constexpr const char* kManifestFileName = "manifest.txt";

// Plain key = value lines in a fixed order:
//
//   format = srdrm-manifest 1
//   jpeg_quality = 85
//   seed = 7
//   scales = 2,4,8
//   reject = <input file name>                        (repeated)
//   pair = <split>|<id>|<hr path>|<lr path per scale>  (repeated)
//
// LR paths follow the order of `scales`.
std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root);
void write_manifest(const DatasetManifest& manifest);  // root / manifest.txt
// Accepts the manifest file or its directory. FormatError when malformed.
DatasetManifest read_manifest(const std::filesystem::path& path);

// Re-stats every file: all must exist, and each LR extent times its scale
// must equal the HR extent. Splits must not share ids. FormatError naming the
// first offending entry.
void validate_manifest(const DatasetManifest& manifest);

struct PrepareOptions {
  std::vector<int> scales = {2, 4, 8};
  int jpeg_quality = kDefaultJpegQuality;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
};

// Images directly inside hr_dir form the train/val pool (seeded shuffle,
// floor(n * val_fraction) go to val); images in hr_dir/test form the test
// split. Each image is resized to 640x480 if needed and saved as the HR
// reference; a JPEG round trip at the given quality followed by repeated 2x
// halvings produces 320x240, 160x120 and 80x60. Output layout:
//   out_dir/<split>/hr/<id>.png, out_dir/<split>/lr_x<s>/<id>.png
// Unreadable inputs are skipped, logged to stderr and listed as rejects.
// ContractError when no readable input exists or options are out of range.
DatasetManifest prepare_lr_sets(const std::filesystem::path& hr_dir,
                                const std::filesystem::path& out_dir,
                                const PrepareOptions& options = {});

struct Batch {
  Tensor4<float> lr;
  Tensor4<float> hr;
  std::vector<std::string> ids;
};

// Paired batches of one split at one scale. Each epoch is shuffled with a
// seed derived from (seed, epoch); the last batch may be short. Decoded
// images are cached after first use.
class BatchStream {
 public:
  BatchStream(DatasetManifest manifest, Split split, int scale,
              std::size_t batch_size, std::uint64_t seed, bool shuffle = true);

  void start_epoch(std::size_t epoch);
  std::optional<Batch> next();

  std::size_t pair_count() const { return pairs_.size(); }
  std::size_t batches_per_epoch() const;

 private:
  const ImageRGB8& load(const std::string& relpath);

  DatasetManifest manifest_;
  std::vector<ManifestPair> pairs_;
  int scale_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  bool shuffle_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::map<std::string, ImageRGB8> cache_;
};

}  // namespace srdrm
