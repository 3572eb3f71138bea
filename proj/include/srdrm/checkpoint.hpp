#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "srdrm/discriminator.hpp"
#include "srdrm/generator.hpp"

namespace srdrm {

// Binary layout (all integers little-endian):
//
//   magic        8 bytes  "SRDRMCKP"
//   version      u32      kCheckpointVersion
//   entry_count  u32
//   entry_count times:
//     name_length u32, name (UTF-8, no terminator)
//     dtype       u32      1 = float32
//     rank        u32, dims u32[rank]
//     payload     float32[prod(dims)] (IEEE-754 little-endian)
//     checksum    u32      CRC-32 of the entry bytes from name_length
//                          through the end of the payload
inline constexpr std::array<char, 8> kCheckpointMagic = {'S', 'R', 'D', 'R',
                                                         'M', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  bool operator==(const CheckpointEntry&) const = default;
};

class Checkpoint {
 public:
  // Throws FormatError on a duplicate name or a dims/values size mismatch.
  void add(CheckpointEntry entry);
  const CheckpointEntry* find(const std::string& name) const;
  const std::vector<CheckpointEntry>& entries() const { return entries_; }
  std::size_t payload_bytes() const;

  bool operator==(const Checkpoint&) const = default;

 private:
  std::vector<CheckpointEntry> entries_;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// FormatError on bad magic or malformed structure, VersionError on an
// unknown version, CorruptionError (naming the entry) on a checksum failure
// or truncation.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Model <-> checkpoint. Parameters and BN running statistics are stored
// under the names reported by the model's parameters()/buffers().
Checkpoint to_checkpoint(const Generator<float>& generator);
void append_to_checkpoint(Checkpoint& ckpt,
                          const Discriminator<float>& discriminator);

// Every tensor the configuration requires must be present with matching
// dims; otherwise FormatError.
Generator<float> generator_from_checkpoint(const Checkpoint& ckpt,
                                           const GeneratorConfig& config);
Discriminator<float> discriminator_from_checkpoint(
    const Checkpoint& ckpt, const DiscriminatorConfig& config);

// Recovers the generator architecture from the stored tensor names and dims.
GeneratorConfig infer_generator_config(const Checkpoint& ckpt);

void save_checkpoint(const Generator<float>& generator,
                     const std::filesystem::path& path);
Generator<float> load_checkpoint(const std::filesystem::path& path,
                                 const GeneratorConfig& config);
// Loads a generator whose architecture is inferred from the file.
Generator<float> load_generator(const std::filesystem::path& path);

}  // namespace srdrm
