#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "srdrm/datakit.hpp"
#include "srdrm/errors.hpp"

namespace srdrm {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatTag = "srdrm-manifest 1";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

int parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw FormatError(fmt::format("manifest: {} '{}' is not an integer", what, s));
  }
  return v;
}

std::pair<std::size_t, std::size_t> image_extent(const fs::path& path) {
  const ImageRGB8 img = read_image(path);
  return {img.width, img.height};
}

}  // namespace

std::string split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ContractError(fmt::format("unknown split '{}' (expected train, val or test)", name));
}

const std::vector<ManifestPair>& DatasetManifest::pairs(Split split) const {
  static const std::vector<ManifestPair> kEmpty;
  const auto it = splits.find(split);
  return it == splits.end() ? kEmpty : it->second;
}

bool DatasetManifest::has_scale(int scale) const {
  return std::find(scales.begin(), scales.end(), scale) != scales.end();
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out;
  out += fmt::format("format = {}\n", kFormatTag);
  out += fmt::format("jpeg_quality = {}\n", manifest.jpeg_quality);
  out += fmt::format("seed = {}\n", manifest.seed);
  out += fmt::format("scales = {}\n", fmt::join(manifest.scales, ","));
  for (const std::string& r : manifest.rejects) out += fmt::format("reject = {}\n", r);
  for (const auto& [split, pairs] : manifest.splits) {
    for (const ManifestPair& p : pairs) {
      out += fmt::format("pair = {}|{}|{}", split_name(split), p.id, p.hr);
      for (int s : manifest.scales) {
        const auto it = p.lr.find(s);
        out += "|";
        if (it != p.lr.end()) out += it->second;
      }
      out += "\n";
    }
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  bool saw_format = false;
  bool saw_scales = false;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError(fmt::format("manifest line {}: expected 'key = value'", lineno));
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "format") {
      if (value != kFormatTag) {
        throw FormatError(fmt::format("manifest line {}: unsupported format '{}'", lineno, value));
      }
      saw_format = true;
    } else if (key == "jpeg_quality") {
      m.jpeg_quality = parse_int(value, "jpeg_quality");
    } else if (key == "seed") {
      try {
        m.seed = std::stoull(value);
      } catch (const std::exception&) {
        throw FormatError(fmt::format("manifest line {}: bad seed '{}'", lineno, value));
      }
    } else if (key == "scales") {
      for (const std::string& s : split_on(value, ',')) m.scales.push_back(parse_int(s, "scale"));
      saw_scales = true;
    } else if (key == "reject") {
      m.rejects.push_back(value);
    } else if (key == "pair") {
      if (!saw_scales) {
        throw FormatError(fmt::format("manifest line {}: pair before scales", lineno));
      }
      const auto fields = split_on(value, '|');
      if (fields.size() != 3 + m.scales.size()) {
        throw FormatError(fmt::format("manifest line {}: expected {} fields, got {}", lineno,
                                      3 + m.scales.size(), fields.size()));
      }
      Split split;
      try {
        split = parse_split(fields[0]);
      } catch (const ContractError& e) {
        throw FormatError(fmt::format("manifest line {}: {}", lineno, e.what()));
      }
      ManifestPair p;
      p.id = fields[1];
      p.hr = fields[2];
      for (std::size_t i = 0; i < m.scales.size(); ++i) {
        if (!fields[3 + i].empty()) p.lr[m.scales[i]] = fields[3 + i];
      }
      m.splits[split].push_back(std::move(p));
    } else {
      throw FormatError(fmt::format("manifest line {}: unknown key '{}'", lineno, key));
    }
  }
  if (!saw_format) throw FormatError("manifest: missing format line");
  return m;
}

void write_manifest(const DatasetManifest& manifest) {
  fs::create_directories(manifest.root);
  const fs::path path = manifest.root / kManifestFileName;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot write '{}'", path.string()));
  os << format_manifest(manifest);
  if (!os) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

DatasetManifest read_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kManifestFileName : path;
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot read manifest '{}'", file.string()));
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_manifest(ss.str(), file.parent_path());
}

void validate_manifest(const DatasetManifest& manifest) {
  std::set<std::string> seen;
  for (const auto& [split, pairs] : manifest.splits) {
    for (const ManifestPair& p : pairs) {
      if (!seen.insert(p.id).second) {
        throw FormatError(fmt::format("manifest: id '{}' appears in more than one entry", p.id));
      }
      const fs::path hr = manifest.root / p.hr;
      if (!fs::is_regular_file(hr)) {
        throw FormatError(fmt::format("manifest: missing HR file '{}'", hr.string()));
      }
      const auto [hw, hh] = image_extent(hr);
      for (const auto& [scale, rel] : p.lr) {
        const fs::path lr = manifest.root / rel;
        if (!fs::is_regular_file(lr)) {
          throw FormatError(fmt::format("manifest: missing LR file '{}'", lr.string()));
        }
        const auto [lw, lh] = image_extent(lr);
        if (lw * static_cast<std::size_t>(scale) != hw ||
            lh * static_cast<std::size_t>(scale) != hh) {
          throw FormatError(fmt::format("manifest: '{}' is {}x{}, expected {}x{} for scale {}",
                                        lr.string(), lw, lh, hw / scale, hh / scale, scale));
        }
      }
    }
  }
}

}  // namespace srdrm
