#pragma once

// Checkpoint container layout (all integers little-endian):
//
//   offset 0   8 bytes   magic "SMIXCKPT"
//   offset 8   u32       format_version (currently 1)
//   offset 12  u64       header length N
//   offset 20  N bytes   UTF-8 JSON header:
//                          { "format_version": 1,
//                            "config": { ...GeneratorConfig... },
//                            "arrays": [ {"name", "shape", "offset", "count"}, ... ],
//                            "data_bytes": <total>, "data_crc32": <crc of data block> }
//   offset 20+N          data block: float32 little-endian arrays at the listed
//                        byte offsets, in header order, no padding.
//
// Generator parameters use their canonical names. Auxiliary arrays (for
// instance a fitted sigma Gaussian) live under the "aux." prefix.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stylemix/generator.hpp"

namespace stylemix {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct CheckpointContents {
  Generator generator;
  ParameterSet aux;
};

std::vector<std::uint8_t> encode_checkpoint(const Generator& gen, const ParameterSet& aux = {});
/// Throws IntegrityError on bad magic, version mismatch, truncation, CRC
/// mismatch, or unknown parameter names.
CheckpointContents decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Generator& gen, const std::filesystem::path& path, const ParameterSet& aux = {});
Generator load_checkpoint(const std::filesystem::path& path);
CheckpointContents load_checkpoint_with_aux(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace stylemix
