#include <algorithm>
#include <iostream>
#include <set>

#include <fmt/format.h>

#include "srdrm/datakit.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/random.hpp"

namespace srdrm {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> list_inputs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Job {
  fs::path input;
  Split split;
  std::string id;
};

struct Outcome {
  bool ok = false;
  bool fatal = false;  // write failures abort; unreadable inputs are rejects
  std::string message;
  ManifestPair pair;
};

Outcome process(const Job& job, const fs::path& out_dir, const PrepareOptions& opt) {
  Outcome r;
  ImageRGB8 hr;
  try {
    hr = read_image(job.input);
  } catch (const Error& e) {
    r.message = e.what();
    return r;
  }
  if (hr.width != kHrWidth || hr.height != kHrHeight) {
    hr = resize_bicubic(hr, kHrWidth, kHrHeight);
  }
  const std::string split = split_name(job.split);
  const std::string file = job.id + ".png";
  r.pair.id = job.id;
  r.pair.hr = fmt::format("{}/hr/{}", split, file);
  write_image(hr, out_dir / r.pair.hr);

  const std::vector<std::uint8_t> jpeg = encode_jpeg(hr, opt.jpeg_quality);
  ImageRGB8 lr = decode_image(jpeg);
  const int max_scale = *std::max_element(opt.scales.begin(), opt.scales.end());
  for (int scale = 2; scale <= max_scale; scale *= 2) {
    lr = halve(lr);
    if (std::find(opt.scales.begin(), opt.scales.end(), scale) == opt.scales.end()) continue;
    const std::string rel = fmt::format("{}/lr_x{}/{}", split, scale, file);
    write_image(lr, out_dir / rel);
    r.pair.lr[scale] = rel;
  }
  r.ok = true;
  return r;
}

}  // namespace

DatasetManifest prepare_lr_sets(const fs::path& hr_dir, const fs::path& out_dir,
                                const PrepareOptions& options) {
  if (options.scales.empty()) throw ContractError("prepare: no scales requested");
  for (int s : options.scales) {
    if (s != 2 && s != 4 && s != 8) {
      throw ContractError(fmt::format("prepare: scale {} not in {{2, 4, 8}}", s));
    }
  }
  if (options.jpeg_quality < 1 || options.jpeg_quality > 100) {
    throw ContractError(
        fmt::format("prepare: jpeg quality {} outside [1, 100]", options.jpeg_quality));
  }
  if (!(options.val_fraction >= 0.0 && options.val_fraction < 1.0)) {
    throw ContractError(
        fmt::format("prepare: val fraction {} outside [0, 1)", options.val_fraction));
  }
  if (!fs::is_directory(hr_dir)) {
    throw ContractError(fmt::format("prepare: '{}' is not a directory", hr_dir.string()));
  }

  std::vector<int> scales = options.scales;
  std::sort(scales.begin(), scales.end());
  scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
  PrepareOptions opt = options;
  opt.scales = scales;

  const std::vector<fs::path> pool = list_inputs(hr_dir);
  const std::vector<fs::path> test = list_inputs(hr_dir / "test");
  if (pool.empty() && test.empty()) {
    throw ContractError(fmt::format("prepare: no images in '{}'", hr_dir.string()));
  }

  // Seeded Fisher-Yates over the sorted pool; the first floor(n * f) are val.
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(options.seed, 0));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const auto val_count =
      static_cast<std::size_t>(static_cast<double>(pool.size()) * options.val_fraction);

  std::vector<Job> jobs;
  std::set<std::string> ids;
  auto add_job = [&](const fs::path& p, Split split) {
    std::string id = p.stem().string();
    if (id.find('|') != std::string::npos || !ids.insert(id).second) {
      throw ContractError(fmt::format("prepare: input '{}' has a duplicate or invalid id '{}'",
                                      p.string(), id));
    }
    jobs.push_back({p, split, std::move(id)});
  };
  for (std::size_t i = 0; i < order.size(); ++i) {
    add_job(pool[order[i]], i < val_count ? Split::val : Split::train);
  }
  for (const fs::path& p : test) add_job(p, Split::test);

  for (Split split : {Split::train, Split::val, Split::test}) {
    fs::create_directories(out_dir / split_name(split) / "hr");
    for (int s : scales) {
      fs::create_directories(out_dir / split_name(split) / fmt::format("lr_x{}", s));
    }
  }

  std::vector<Outcome> outcomes(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      outcomes[k] = process(jobs[k], out_dir, opt);
    } catch (const std::exception& e) {
      outcomes[k].fatal = true;
      outcomes[k].message = e.what();
    }
  }

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.scales = scales;
  manifest.jpeg_quality = options.jpeg_quality;
  manifest.seed = options.seed;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Outcome& o = outcomes[k];
    if (o.fatal) {
      throw IoError(fmt::format("prepare: '{}': {}", jobs[k].input.string(), o.message));
    }
    if (!o.ok) {
      std::cerr << fmt::format("warning: skipping '{}': {}\n", jobs[k].input.string(), o.message);
      manifest.rejects.push_back(fs::relative(jobs[k].input, hr_dir).generic_string());
      continue;
    }
    manifest.splits[jobs[k].split].push_back(o.pair);
  }
  std::sort(manifest.rejects.begin(), manifest.rejects.end());
  for (auto& [split, pairs] : manifest.splits) {
    std::sort(pairs.begin(), pairs.end(),
              [](const ManifestPair& a, const ManifestPair& b) { return a.id < b.id; });
  }
  if (manifest.splits.empty()) {
    throw ContractError(fmt::format("prepare: no readable images in '{}'", hr_dir.string()));
  }
  write_manifest(manifest);
  return manifest;
}

}  // namespace srdrm
