#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "volc/models.hpp"

namespace volc {

struct Model {
  ModelSpec spec;
  ModelWeights weights;

  friend bool operator==(const Model&, const Model&) = default;
};

// Layout, all little-endian:
//   "VOLCM01"
//   u8 name length, name bytes
//   u32 C, u32 H, u32 W
//   u32 layer count, per layer: u8 tag, u32 units, u32 kernel, f32 rate
//   u32 tensor count, per tensor: u8 rank, u32 dims[rank]
//   float32 data of every tensor, in table order
//   u32 CRC-32 (zlib polynomial) of everything above
//
// Decoding errors: bad magic or unknown layer tag -> kFormat; data ending
// early -> kIntegrity; CRC mismatch -> kChecksum; a shape table that does not
// match the layer list -> kIntegrity. Messages name the byte offset.
std::vector<std::uint8_t> encode_model(const ModelSpec& spec, const ModelWeights& weights);
Model decode_model(const std::vector<std::uint8_t>& bytes);

// Returns the number of bytes written. The file is replaced atomically.
std::size_t save_model(const ModelSpec& spec, const ModelWeights& weights, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

inline constexpr const char* kModelExtension = ".volcm";

}  // namespace volc
