#include "srdrm/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <zlib.h>

#include "srdrm/errors.hpp"

namespace srdrm {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return bytes_.size() - pos_ >= n; }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::optional<std::uint32_t> u32() {
    if (!has(4)) return std::nullopt;
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += 4;
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> since(std::size_t start) const {
    return bytes_.subspan(start, pos_ - start);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename V>
void export_views(Checkpoint& ckpt, const std::vector<ParamView<V>>& views) {
  for (const auto& v : views) {
    CheckpointEntry e;
    e.name = v.name;
    for (std::size_t d : v.dims) e.dims.push_back(static_cast<std::uint32_t>(d));
    e.values.assign(v.values.begin(), v.values.end());
    ckpt.add(std::move(e));
  }
}

void import_views(const Checkpoint& ckpt, const std::vector<ParamView<float>>& views) {
  for (const auto& v : views) {
    const CheckpointEntry* e = ckpt.find(v.name);
    if (e == nullptr) {
      throw FormatError(fmt::format("checkpoint is missing tensor '{}'", v.name));
    }
    std::vector<std::uint32_t> want;
    for (std::size_t d : v.dims) want.push_back(static_cast<std::uint32_t>(d));
    if (e->dims != want) {
      throw FormatError(fmt::format(
          "checkpoint tensor '{}' has dims [{}], configuration expects [{}]",
          v.name, fmt::join(e->dims, ","), fmt::join(want, ",")));
    }
    std::copy(e->values.begin(), e->values.end(), v.values.begin());
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open checkpoint '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void Checkpoint::add(CheckpointEntry entry) {
  if (find(entry.name) != nullptr) {
    throw FormatError(fmt::format("duplicate checkpoint entry '{}'", entry.name));
  }
  if (element_count(entry.dims) != entry.values.size()) {
    throw FormatError(fmt::format("checkpoint entry '{}': dims hold {} values, got {}",
                                  entry.name, element_count(entry.dims),
                                  entry.values.size()));
  }
  entries_.push_back(std::move(entry));
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const CheckpointEntry& e) { return e.name == name; });
  return it == entries_.end() ? nullptr : &*it;
}

std::size_t Checkpoint::payload_bytes() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.values.size() * sizeof(float);
  return n;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.entries().size()));
  for (const CheckpointEntry& e : ckpt.entries()) {
    const std::size_t start = out.size();
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, kDtypeFloat32);
    put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
    for (std::uint32_t d : e.dims) put_u32(out, d);
    for (float v : e.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
    const std::uint32_t crc =
        crc32_of(std::span<const std::uint8_t>(out).subspan(start));
    put_u32(out, crc);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (!r.has(kCheckpointMagic.size()) ||
      !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(),
                  r.take(kCheckpointMagic.size()).begin())) {
    throw FormatError("not a checkpoint: bad magic (expected \"SRDRMCKP\")");
  }
  const auto version = r.u32();
  if (!version) throw FormatError("checkpoint header is truncated");
  if (*version != kCheckpointVersion) {
    throw VersionError(fmt::format(
        "unsupported checkpoint version {} (this build reads version {})",
        *version, kCheckpointVersion));
  }
  const auto count = r.u32();
  if (!count) throw FormatError("checkpoint header is truncated");

  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < *count; ++i) {
    const std::size_t start = r.pos();
    const std::string fallback = fmt::format("#{}", i);
    const auto name_len = r.u32();
    if (!name_len || !r.has(*name_len)) {
      throw CorruptionError(fmt::format("checkpoint entry {} is truncated", fallback));
    }
    auto name_bytes = r.take(*name_len);
    CheckpointEntry e;
    e.name.assign(name_bytes.begin(), name_bytes.end());
    const auto dtype = r.u32();
    const auto rank = r.u32();
    if (!dtype || !rank) {
      throw CorruptionError(fmt::format("checkpoint entry '{}' is truncated", e.name));
    }
    if (*dtype != kDtypeFloat32) {
      throw FormatError(fmt::format("checkpoint entry '{}' has unknown dtype {}",
                                    e.name, *dtype));
    }
    if (*rank > 8) {
      throw CorruptionError(fmt::format("checkpoint entry '{}' has implausible rank {}",
                                        e.name, *rank));
    }
    for (std::uint32_t d = 0; d < *rank; ++d) {
      const auto dim = r.u32();
      if (!dim) throw CorruptionError(fmt::format("checkpoint entry '{}' is truncated", e.name));
      e.dims.push_back(*dim);
    }
    const std::size_t n = element_count(e.dims);
    if (r.remaining() / 4 < n) {
      throw CorruptionError(fmt::format("checkpoint entry '{}' payload is truncated", e.name));
    }
    e.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) e.values[k] = std::bit_cast<float>(*r.u32());
    const std::uint32_t computed = crc32_of(r.since(start));
    const auto stored = r.u32();
    if (!stored) {
      throw CorruptionError(fmt::format("checkpoint entry '{}' checksum is truncated", e.name));
    }
    if (*stored != computed) {
      throw CorruptionError(fmt::format(
          "checkpoint entry '{}' failed its checksum (stored {:08x}, computed {:08x})",
          e.name, *stored, computed));
    }
    ckpt.add(std::move(e));
  }
  if (r.remaining() != 0) {
    throw CorruptionError(fmt::format("checkpoint has {} trailing bytes", r.remaining()));
  }
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write checkpoint '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("short write to '{}'", path.string()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return decode_checkpoint(bytes);
}

Checkpoint to_checkpoint(const Generator<float>& generator) {
  Checkpoint ckpt;
  export_views(ckpt, generator.parameters());
  export_views(ckpt, generator.buffers());
  return ckpt;
}

void append_to_checkpoint(Checkpoint& ckpt, const Discriminator<float>& discriminator) {
  export_views(ckpt, discriminator.parameters());
  export_views(ckpt, discriminator.buffers());
}

Generator<float> generator_from_checkpoint(const Checkpoint& ckpt,
                                           const GeneratorConfig& config) {
  Generator<float> g = build_generator<float>(config, 0).zeros_like();
  import_views(ckpt, g.parameters());
  import_views(ckpt, g.buffers());
  return g;
}

Discriminator<float> discriminator_from_checkpoint(const Checkpoint& ckpt,
                                                   const DiscriminatorConfig& config) {
  Discriminator<float> d = build_discriminator<float>(config, 0).zeros_like();
  import_views(ckpt, d.parameters());
  import_views(ckpt, d.buffers());
  return d;
}

GeneratorConfig infer_generator_config(const Checkpoint& ckpt) {
  GeneratorConfig config;
  int blocks = 0;
  while (ckpt.find(fmt::format("g.block{}.head.weight", blocks)) != nullptr) ++blocks;
  if (blocks == 0) {
    throw FormatError("checkpoint holds no generator tensors (g.block0.head.weight)");
  }
  int units = 0;
  while (ckpt.find(fmt::format("g.block0.unit{}.first.weight", units)) != nullptr) ++units;
  const CheckpointEntry* head = ckpt.find("g.block0.head.weight");
  if (head->dims.size() != 4) {
    throw FormatError("g.block0.head.weight must be rank 4");
  }
  config.scale_exp = blocks;
  config.base_filters = static_cast<int>(head->dims[0]);
  config.residual_layers = units;
  config.use_bn_in_drm = ckpt.find("g.block0.unit0.first_bn.gamma") != nullptr;
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(fmt::format("checkpoint describes an invalid generator: {}", e.what()));
  }
  return config;
}

void save_checkpoint(const Generator<float>& generator,
                     const std::filesystem::path& path) {
  write_checkpoint(to_checkpoint(generator), path);
}

Generator<float> load_checkpoint(const std::filesystem::path& path,
                                 const GeneratorConfig& config) {
  return generator_from_checkpoint(read_checkpoint(path), config);
}

Generator<float> load_generator(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  return generator_from_checkpoint(ckpt, infer_generator_config(ckpt));
}

}  // namespace srdrm
