#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "volc/rng.hpp"

namespace volc {

// ------------------------------------------------------------- catalog

// Days since 1970-01-01 for a valid YYYY-MM-DD date, empty otherwise.
std::optional<long> parse_iso_date(std::string_view text);

struct EruptionRecord {
  std::string start_date;  // YYYY-MM-DD
  std::string volcano_name;
  double latitude = 0.0;
  double longitude = 0.0;

  friend bool operator==(const EruptionRecord&, const EruptionRecord&) = default;
};

struct CatalogRowError {
  std::size_t line;  // 1-based, header is line 1
  std::string message;
};

struct CatalogParse {
  std::vector<EruptionRecord> records;
  std::vector<CatalogRowError> errors;
};

inline constexpr const char* kCatalogHeader =
    "Eruption Start Time,Volcano name,Latitude (deg),Longitude (deg)";

// CSV with the header above. Fields may be double-quoted (RFC 4180). Bad
// rows are reported with their line number and skipped; an empty text
// yields no records. A missing or different header is a parse error.
CatalogParse parse_catalog(std::string_view text);

// Header plus one row per record; numbers in shortest round-trip form, names
// quoted only when they need it.
std::string serialize_catalog(std::span<const EruptionRecord> records);

// ------------------------------------------------------------ manifest

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split split) noexcept;
Split parse_split(std::string_view name);

inline constexpr std::array<const char*, 6> kSubclasses = {"eruption", "volcano_quiet", "city",
                                                           "mountain", "cloudy",        "random"};
bool is_known_subclass(std::string_view name) noexcept;

struct ManifestEntry {
  std::string path;  // sample directory, relative to the dataset root
  int label = 0;     // 1 eruption, 0 no eruption
  std::string subclass;
  Split split = Split::kTrain;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> samples;

  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split, int label) const;
  // Unique paths, labels in {0, 1}, known subclasses.
  void validate() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline constexpr const char* kManifestFileName = "manifest.jsonl";

std::string manifest_to_jsonl(const DatasetManifest& manifest);
DatasetManifest manifest_from_jsonl(std::string_view text);
void save_manifest(const std::filesystem::path& file, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& file);

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  void validate() const;
};

// Per label, shuffles that label's samples (in input order) with a stream
// forked from `seed`, then takes floor(train*n) for train, floor(val*n) for
// val and the rest for test. Both labels must be present.
void assign_splits(std::vector<ManifestEntry>& entries, const SplitFractions& fractions,
                   std::uint64_t seed);

// Every directory under `root` holding a patch with a known label, sorted by
// relative path, then split as above. Unlabelled patches are skipped.
DatasetManifest build_manifest(const std::filesystem::path& root, const SplitFractions& fractions,
                               std::uint64_t seed);

// Directories under `root` that contain a band file, relative and sorted.
std::vector<std::string> find_patch_dirs(const std::filesystem::path& root);

// ------------------------------------------------------- oversampling

struct BatchPlan {
  std::size_t epoch = 0;
  std::vector<std::vector<std::size_t>> batches;
  std::array<double, 2> class_weights{};  // per-sample draw probability for label 0 and 1

  std::size_t draws() const;
};

// Each draw picks a label with probability 1/2, then a uniformly chosen
// sample of that label, with replacement. Returned indices point into
// `labels`. Draws are cut into batches of `batch_size`; a final remainder of
// one is folded into the previous batch so no batch drops below two.
BatchPlan balanced_batches(std::span<const int> labels, std::size_t batch_size,
                           std::size_t epoch_len, RngStream& rng, std::size_t epoch = 0);

// Same over the train split of a manifest; indices point into
// manifest.samples.
BatchPlan balanced_batches(const DatasetManifest& manifest, std::size_t batch_size,
                           std::size_t epoch_len, RngStream& rng, std::size_t epoch = 0);

// --------------------------------------------------------------- ingest

struct IngestOptions {
  double radius_km = 50.0;
  long window_days = 90;  // patch date within [start, start + window]
};

struct IngestResult {
  DatasetManifest manifest;
  std::size_t labelled_from_meta = 0;
  std::size_t labelled_from_catalog = 0;
};

// Labels come from meta.json when present. An unlabelled patch becomes an
// eruption when a catalog eruption starts within `radius_km` and
// `window_days` before its acquisition date; otherwise it is a negative,
// subclass volcano_quiet when it lies near any catalog volcano, random
// elsewhere.
IngestResult ingest_catalog(const std::filesystem::path& root, std::span<const EruptionRecord> catalog,
                            const SplitFractions& fractions, std::uint64_t seed,
                            const IngestOptions& options = {});

double great_circle_km(double lat1, double lon1, double lat2, double lon2);

}  // namespace volc
