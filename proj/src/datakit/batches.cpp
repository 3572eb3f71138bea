#include <fmt/format.h>

#include "srdrm/datakit.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/random.hpp"

namespace srdrm {

namespace fs = std::filesystem;

BatchStream::BatchStream(DatasetManifest manifest, Split split, int scale,
                         std::size_t batch_size, std::uint64_t seed, bool shuffle)
    : manifest_(std::move(manifest)),
      scale_(scale),
      batch_size_(batch_size),
      seed_(seed),
      shuffle_(shuffle) {
  if (batch_size_ == 0) throw ContractError("batch size must be at least 1");
  if (!manifest_.has_scale(scale_)) {
    throw ContractError(fmt::format("scale {} is not present in the manifest", scale_));
  }
  pairs_ = manifest_.pairs(split);
  if (pairs_.empty()) {
    throw ContractError(fmt::format("split '{}' is empty or absent", split_name(split)));
  }
  for (const ManifestPair& p : pairs_) {
    if (!p.lr.contains(scale_)) {
      throw ContractError(fmt::format("pair '{}' has no LR image at scale {}", p.id, scale_));
    }
  }
  start_epoch(0);
}

std::size_t BatchStream::batches_per_epoch() const {
  return (pairs_.size() + batch_size_ - 1) / batch_size_;
}

void BatchStream::start_epoch(std::size_t epoch) {
  order_.resize(pairs_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (shuffle_) {
    Rng rng(derive_seed(seed_, epoch));
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::swap(order_[i - 1], order_[rng.below(i)]);
    }
  }
  cursor_ = 0;
}

const ImageRGB8& BatchStream::load(const std::string& relpath) {
  auto it = cache_.find(relpath);
  if (it != cache_.end()) return it->second;
  const fs::path path = manifest_.root / relpath;
  if (!fs::is_regular_file(path)) {
    throw IoError(fmt::format("dataset file '{}' is missing", path.string()));
  }
  return cache_.emplace(relpath, read_image(path)).first->second;
}

std::optional<Batch> BatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<ImageRGB8> lr, hr;
  Batch batch;
  for (std::size_t i = cursor_; i < end; ++i) {
    const ManifestPair& p = pairs_[order_[i]];
    lr.push_back(load(p.lr.at(scale_)));
    hr.push_back(load(p.hr));
    const ImageRGB8& l = lr.back();
    const ImageRGB8& h = hr.back();
    if (l.width * static_cast<std::size_t>(scale_) != h.width ||
        l.height * static_cast<std::size_t>(scale_) != h.height) {
      throw FormatError(fmt::format("pair '{}': LR {}x{} does not match HR {}x{} at scale {}",
                                    p.id, l.width, l.height, h.width, h.height, scale_));
    }
    batch.ids.push_back(p.id);
  }
  cursor_ = end;
  batch.lr = images_to_tensor<float>(lr);
  batch.hr = images_to_tensor<float>(hr);
  return batch;
}

}  // namespace srdrm
