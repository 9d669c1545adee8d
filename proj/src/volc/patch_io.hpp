#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "volc/preprocess.hpp"

namespace volc {

// Per-sample metadata stored next to the band file as meta.json.
struct PatchMeta {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  std::string date;          // ISO-8601
  std::optional<int> label;  // 1 eruption, 0 no eruption, empty when unknown
  std::string subclass;      // may be empty
};

inline constexpr const char* kBandFileName = "bands.vbp";
inline constexpr const char* kMetaFileName = "meta.json";
inline constexpr const char* kCompositeFileName = "composite.vrc";

// "VBP1", u16 H, u16 W, u8 sensor id, then five little-endian float32 planes
// in the order blue, green, red, swir1, swir2.
std::vector<std::uint8_t> encode_band_patch(const BandPatch& patch);
BandPatch decode_band_patch(const std::vector<std::uint8_t>& bytes);

// Writes dir/bands.vbp and dir/meta.json.
void write_patch(const std::filesystem::path& dir, const BandPatch& patch, const PatchMeta& meta);
PatchMeta read_patch_meta(const std::filesystem::path& dir);
// Band file plus the location/date fields from meta.json.
BandPatch read_patch(const std::filesystem::path& dir);

// Same header with magic "VRC1" and three planes R, G, B.
void write_composite(const std::filesystem::path& file, const RgbComposite& composite,
                     Sensor sensor = Sensor::kSynthetic);
RgbComposite read_composite(const std::filesystem::path& file);

std::string meta_to_json(const PatchMeta& meta);
PatchMeta meta_from_json(const std::string& text);

}  // namespace volc
