#pragma once

#include <filesystem>
#include <string>

#include "volc/dataset.hpp"
#include "volc/patch_io.hpp"

namespace volc {

struct SynthOptions {
  std::size_t size = 128;  // native patch side; composites are resized later
  SplitFractions fractions;
};

struct SynthSample {
  BandPatch patch;  // reflectance, sensor Synthetic
  PatchMeta meta;
};

// Non-eruption generators cycle through these, in order.
inline constexpr std::array<const char*, 5> kNegativeSubclasses = {"volcano_quiet", "city", "mountain",
                                                                   "cloudy", "random"};

// One scene of the given subclass ("eruption" or a negative subclass).
// Eruptions carry a compact hot region with swir2 >= 0.65 and swir1 >= 0.4
// of radius >= 7 px at size 128; cloudy scenes keep swir2 <= 0.2.
SynthSample synth_sample(const std::string& subclass, std::size_t size, RngStream rng, const std::string& id);

// Writes `n_per_class` eruption and non-eruption samples under
// out/samples/<id>/ plus out/manifest.jsonl. Same arguments, same bytes.
DatasetManifest synth_generate(std::size_t n_per_class, std::uint64_t seed, const std::filesystem::path& out,
                               const SynthOptions& options = {});

}  // namespace volc
