#include "volc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <set>

#include "volc/bytes.hpp"
#include "volc/error.hpp"
#include "volc/patch_io.hpp"

namespace volc {

// ------------------------------------------------------------- catalog

namespace {

bool is_leap(long y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

// Howard Hinnant's days_from_civil.
long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV line; returns false on an unterminated quote.
bool split_csv(std::string_view line, std::vector<std::string>& fields) {
  fields.clear();
  std::size_t i = 0;
  while (true) {
    std::string field;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        field += line[i++];
      }
      if (!closed) return false;
      while (i < line.size() && line[i] != ',') {
        if (line[i] != ' ' && line[i] != '\t') return false;
        ++i;
      }
    } else {
      const std::size_t start = i;
      while (i < line.size() && line[i] != ',') ++i;
      field = std::string(trim(line.substr(start, i - start)));
    }
    fields.push_back(std::move(field));
    if (i >= line.size()) return true;
    ++i;  // comma
  }
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
  const bool needs_quotes = s.find_first_of(",\"") != std::string::npos || s != trim(s);
  if (!needs_quotes) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::optional<long> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<long> {
    long v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') return std::nullopt;
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  const auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
  if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1) return std::nullopt;
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const long max_day = kDays[*m - 1] + (*m == 2 && is_leap(*y) ? 1 : 0);
  if (*d > max_day) return std::nullopt;
  return days_from_civil(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
}

CatalogParse parse_catalog(std::string_view text) {
  CatalogParse out;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<std::string> fields;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      std::vector<std::string> header;
      if (!split_csv(line, header) || header.size() != 4 || header[0] != "Eruption Start Time" ||
          header[1] != "Volcano name" || header[2] != "Latitude (deg)" || header[3] != "Longitude (deg)") {
        fail(ErrorCode::kParse, "catalog line " + std::to_string(line_no) + ": expected header '" +
                                    kCatalogHeader + "'");
      }
      header_seen = true;
      continue;
    }
    auto row_error = [&](std::string message) { out.errors.push_back({line_no, std::move(message)}); };
    if (!split_csv(line, fields)) {
      row_error("unterminated quoted field");
      continue;
    }
    if (fields.size() != 4) {
      row_error("expected 4 fields, got " + std::to_string(fields.size()));
      continue;
    }
    if (!parse_iso_date(fields[0])) {
      row_error("malformed date '" + fields[0] + "'");
      continue;
    }
    if (fields[1].empty()) {
      row_error("empty volcano name");
      continue;
    }
    const auto lat = parse_number(fields[2]);
    const auto lon = parse_number(fields[3]);
    if (!lat) {
      row_error("malformed latitude '" + fields[2] + "'");
      continue;
    }
    if (!lon) {
      row_error("malformed longitude '" + fields[3] + "'");
      continue;
    }
    if (std::abs(*lat) > 90.0) {
      row_error("latitude out of range");
      continue;
    }
    if (std::abs(*lon) > 180.0) {
      row_error("longitude out of range");
      continue;
    }
    out.records.push_back({fields[0], fields[1], *lat, *lon});
  }
  return out;
}

std::string serialize_catalog(std::span<const EruptionRecord> records) {
  std::string out = std::string(kCatalogHeader) + "\n";
  for (const auto& r : records) {
    out += csv_field(r.start_date) + "," + csv_field(r.volcano_name) + "," + format_number(r.latitude) +
           "," + format_number(r.longitude) + "\n";
  }
  return out;
}

// ------------------------------------------------------------ manifest

const char* split_name(Split split) noexcept {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    if (name == split_name(s)) return s;
  }
  fail(ErrorCode::kInvalidParameter, "unknown split '" + std::string(name) + "' (train, val, test)");
}

bool is_known_subclass(std::string_view name) noexcept {
  return std::find(kSubclasses.begin(), kSubclasses.end(), name) != kSubclasses.end();
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == split) out.push_back(i);
  }
  return out;
}

std::size_t DatasetManifest::count(Split split, int label) const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [&](const ManifestEntry& e) {
    return e.split == split && e.label == label;
  }));
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : samples) {
    if (e.path.empty()) fail(ErrorCode::kParse, "manifest: empty sample path");
    if (!seen.insert(e.path).second) fail(ErrorCode::kParse, "manifest: duplicate path " + e.path);
    if (e.label != 0 && e.label != 1) fail(ErrorCode::kParse, "manifest: label must be 0 or 1 for " + e.path);
    if (!is_known_subclass(e.subclass)) {
      fail(ErrorCode::kParse, "manifest: unknown subclass '" + e.subclass + "' for " + e.path);
    }
  }
}

std::string manifest_to_jsonl(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.samples) {
    nlohmann::ordered_json j;
    j["path"] = e.path;
    j["label"] = e.label;
    j["subclass"] = e.subclass;
    j["split"] = split_name(e.split);
    out += j.dump() + "\n";
  }
  return out;
}

DatasetManifest manifest_from_jsonl(std::string_view text) {
  DatasetManifest manifest;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.path = j.at("path").get<std::string>();
      e.label = j.at("label").get<int>();
      e.subclass = j.at("subclass").get<std::string>();
      e.split = parse_split(j.at("split").get<std::string>());
      manifest.samples.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorCode::kParse, where + ex.what());
    } catch (const Error& ex) {
      fail(ErrorCode::kParse, where + ex.what());
    }
  }
  manifest.validate();
  return manifest;
}

void save_manifest(const std::filesystem::path& file, const DatasetManifest& manifest) {
  manifest.validate();
  write_text(file, manifest_to_jsonl(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path& file) {
  return manifest_from_jsonl(read_text(file));
}

void SplitFractions::validate() const {
  if (!(train > 0.0) || !(val > 0.0) || !(test > 0.0)) {
    fail(ErrorCode::kInvalidParameter, "split fractions must all be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    fail(ErrorCode::kInvalidParameter, "split fractions must sum to 1");
  }
}

namespace {

std::size_t share(double fraction, std::size_t n) {
  // The epsilon keeps products like 0.7 * 50 from flooring to 34.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace

void assign_splits(std::vector<ManifestEntry>& entries, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  const RngStream base(seed);
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].label == label) members.push_back(i);
    }
    if (members.empty()) {
      fail(ErrorCode::kMissingClass, std::string("dataset has no ") + (label ? "eruption" : "no-eruption") +
                                         " samples");
    }
    RngStream rng = base.fork("split", static_cast<std::uint64_t>(label));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    const std::size_t n = members.size();
    const std::size_t n_train = share(fractions.train, n);
    const std::size_t n_val = std::min(n - n_train, share(fractions.val, n));
    for (std::size_t k = 0; k < n; ++k) {
      entries[members[k]].split = k < n_train ? Split::kTrain : k < n_train + n_val ? Split::kVal : Split::kTest;
    }
  }
}

std::vector<std::string> find_patch_dirs(const std::filesystem::path& root) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec)) {
    fail(ErrorCode::kIo, "dataset root " + root.string() + " is not a directory");
  }
  std::vector<std::string> dirs;
  for (auto it = std::filesystem::recursive_directory_iterator(root, ec);
       it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) fail(ErrorCode::kIo, "scanning " + root.string() + ": " + ec.message());
    if (it->is_regular_file() && it->path().filename() == kBandFileName) {
      dirs.push_back(std::filesystem::relative(it->path().parent_path(), root).generic_string());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

DatasetManifest build_manifest(const std::filesystem::path& root, const SplitFractions& fractions,
                               std::uint64_t seed) {
  fractions.validate();
  DatasetManifest manifest;
  for (const auto& rel : find_patch_dirs(root)) {
    const PatchMeta meta = read_patch_meta(root / rel);
    if (!meta.label) continue;
    std::string subclass = meta.subclass;
    if (subclass.empty()) subclass = *meta.label ? "eruption" : "random";
    manifest.samples.push_back({rel, *meta.label, subclass, Split::kTrain});
  }
  assign_splits(manifest.samples, fractions, seed);
  manifest.validate();
  return manifest;
}

// ------------------------------------------------------- oversampling

std::size_t BatchPlan::draws() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

BatchPlan balanced_batches(std::span<const int> labels, std::size_t batch_size, std::size_t epoch_len,
                           RngStream& rng, std::size_t epoch) {
  if (batch_size < 2) fail(ErrorCode::kInvalidParameter, "batch size must be at least 2");
  if (epoch_len < 2) fail(ErrorCode::kInvalidParameter, "epoch length must be at least 2");
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) fail(ErrorCode::kInvalidParameter, "labels must be 0 or 1");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (int label : {0, 1}) {
    if (members[static_cast<std::size_t>(label)].empty()) {
      fail(ErrorCode::kMissingClass, std::string("train split has no ") +
                                         (label ? "eruption" : "no-eruption") + " samples");
    }
  }
  BatchPlan plan;
  plan.epoch = epoch;
  for (std::size_t c = 0; c < 2; ++c) plan.class_weights[c] = 0.5 / static_cast<double>(members[c].size());
  std::vector<std::size_t> draws(epoch_len);
  for (auto& d : draws) {
    const auto& pool = members[rng.below(2)];
    d = pool[rng.below(pool.size())];
  }
  for (std::size_t start = 0; start < epoch_len; start += batch_size) {
    const std::size_t end = std::min(epoch_len, start + batch_size);
    if (end - start == 1) {
      plan.batches.back().push_back(draws[start]);
    } else {
      plan.batches.emplace_back(draws.begin() + static_cast<std::ptrdiff_t>(start),
                                draws.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return plan;
}

BatchPlan balanced_batches(const DatasetManifest& manifest, std::size_t batch_size, std::size_t epoch_len,
                           RngStream& rng, std::size_t epoch) {
  const auto train = manifest.indices(Split::kTrain);
  std::vector<int> labels;
  labels.reserve(train.size());
  for (std::size_t i : train) labels.push_back(manifest.samples[i].label);
  BatchPlan plan = balanced_batches(labels, batch_size, epoch_len, rng, epoch);
  for (auto& batch : plan.batches) {
    for (auto& idx : batch) idx = train[idx];
  }
  return plan;
}

// --------------------------------------------------------------- ingest

double great_circle_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double kRad = 3.14159265358979323846 / 180.0;
  const double dlat = (lat2 - lat1) * kRad, dlon = (lon2 - lon1) * kRad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * kRad) * std::cos(lat2 * kRad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

IngestResult ingest_catalog(const std::filesystem::path& root, std::span<const EruptionRecord> catalog,
                            const SplitFractions& fractions, std::uint64_t seed, const IngestOptions& options) {
  fractions.validate();
  if (!(options.radius_km >= 0.0) || options.window_days < 0) {
    fail(ErrorCode::kInvalidParameter, "ingest radius and window must be non-negative");
  }
  IngestResult result;
  for (const auto& rel : find_patch_dirs(root)) {
    const PatchMeta meta = read_patch_meta(root / rel);
    ManifestEntry entry{rel, 0, meta.subclass, Split::kTrain};
    if (meta.label) {
      entry.label = *meta.label;
      if (entry.subclass.empty()) entry.subclass = entry.label ? "eruption" : "random";
      ++result.labelled_from_meta;
    } else {
      const auto date = parse_iso_date(meta.date);
      bool near_volcano = false, erupting = false;
      for (const auto& rec : catalog) {
        if (great_circle_km(meta.lat, meta.lon, rec.latitude, rec.longitude) > options.radius_km) continue;
        near_volcano = true;
        const auto start = parse_iso_date(rec.start_date);
        if (date && start && *date >= *start && *date - *start <= options.window_days) erupting = true;
      }
      entry.label = erupting ? 1 : 0;
      entry.subclass = erupting ? "eruption" : near_volcano ? "volcano_quiet" : "random";
      ++result.labelled_from_catalog;
    }
    result.manifest.samples.push_back(std::move(entry));
  }
  assign_splits(result.manifest.samples, fractions, seed);
  result.manifest.validate();
  return result;
}

}  // namespace volc
