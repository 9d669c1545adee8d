#include "volc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace volc {
namespace {

constexpr double kPi = 3.14159265358979323846;

using Field = std::vector<double>;

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Value noise on a (cells+1)^2 lattice, smoothstep-interpolated, in [0, 1].
Field value_noise(std::size_t size, std::size_t cells, RngStream& rng) {
  const std::size_t n = cells + 1;
  std::vector<double> lattice(n * n);
  for (double& v : lattice) v = rng.uniform();
  Field f(size * size);
  const double step = static_cast<double>(cells) / static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    const double gy = (static_cast<double>(y) + 0.5) * step;
    const auto y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), cells - 1);
    const double ty = smoothstep(0.0, 1.0, gy - static_cast<double>(y0));
    for (std::size_t x = 0; x < size; ++x) {
      const double gx = (static_cast<double>(x) + 0.5) * step;
      const auto x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), cells - 1);
      const double tx = smoothstep(0.0, 1.0, gx - static_cast<double>(x0));
      const double a = lattice[y0 * n + x0], b = lattice[y0 * n + x0 + 1];
      const double c = lattice[(y0 + 1) * n + x0], d = lattice[(y0 + 1) * n + x0 + 1];
      f[y * size + x] = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  }
  return f;
}

Field fbm(std::size_t size, RngStream& rng) {
  Field f(size * size, 0.0);
  const std::size_t cells[] = {3, 7, 15, 31};
  const double weights[] = {0.45, 0.27, 0.17, 0.11};
  for (std::size_t o = 0; o < 4; ++o) {
    const Field layer = value_noise(size, cells[o], rng);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += weights[o] * layer[i];
  }
  return f;
}

struct Scene {
  std::size_t size;
  std::array<Field, kBandCount> band;

  explicit Scene(std::size_t s) : size(s) {
    for (auto& b : band) b.assign(s * s, 0.0);
  }
  double dist(std::size_t i, double cx, double cy) const {
    const double x = static_cast<double>(i % size) + 0.5 - cx;
    const double y = static_cast<double>(i / size) + 0.5 - cy;
    return std::sqrt(x * x + y * y);
  }
  double angle(std::size_t i, double cx, double cy) const {
    return std::atan2(static_cast<double>(i / size) + 0.5 - cy, static_cast<double>(i % size) + 0.5 - cx);
  }
};

// Vegetation/soil/rock mix; swir2 stays below about 0.24.
Scene terrain(std::size_t size, RngStream& rng) {
  Scene s(size);
  const std::array<double, kBandCount> base = {rng.uniform(0.04, 0.08), rng.uniform(0.06, 0.11),
                                               rng.uniform(0.07, 0.13), rng.uniform(0.15, 0.28),
                                               rng.uniform(0.08, 0.18)};
  const Field tex = fbm(size, rng);
  for (std::size_t b = 0; b < kBandCount; ++b) {
    for (std::size_t i = 0; i < tex.size(); ++i) s.band[b][i] = base[b] * (0.7 + 0.6 * tex[i]);
  }
  return s;
}

// Darkened cone with a small crater.
void add_cone(Scene& s, RngStream& rng, double& cx, double& cy) {
  const double sz = static_cast<double>(s.size);
  cx = sz * rng.uniform(0.35, 0.65);
  cy = sz * rng.uniform(0.35, 0.65);
  const double radius = sz * rng.uniform(0.25, 0.4);
  const double crater = radius * rng.uniform(0.08, 0.15);
  for (std::size_t i = 0; i < s.size * s.size; ++i) {
    const double d = s.dist(i, cx, cy);
    const double dark = 0.55 + 0.45 * smoothstep(0.0, radius, d);
    const double pit = d < crater ? 0.6 : 1.0;
    for (std::size_t b = 0; b < kBandCount; ++b) s.band[b][i] *= dark * pit;
  }
}

// Bright in the visible, cold in the SWIR.
void add_clouds(Scene& s, RngStream& rng, double coverage, double keep_x, double keep_y, double keep_r) {
  const Field f = fbm(s.size, rng);
  const double brightness = rng.uniform(0.45, 0.8);
  const double threshold = 1.0 - coverage;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double o = smoothstep(threshold - 0.1, threshold + 0.1, f[i] * 0.6 + 0.4 * coverage);
    if (keep_r > 0.0) o *= smoothstep(keep_r, keep_r * 1.4, s.dist(i, keep_x, keep_y));
    for (std::size_t b : {kBlue, kGreen, kRed}) s.band[b][i] = s.band[b][i] * (1 - o) + brightness * o;
    s.band[kSwir1][i] = s.band[kSwir1][i] * (1 - o) + 0.12 * o;
    s.band[kSwir2][i] = s.band[kSwir2][i] * (1 - o) + 0.04 * o;
  }
}

void add_hotspot(Scene& s, RngStream& rng, double cx, double cy) {
  const double scale = static_cast<double>(s.size) / 128.0;
  const double radius = rng.uniform(7.0, 12.0) * std::max(scale, 0.25);
  const int lobes = 2 + static_cast<int>(rng.below(3));
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double peak2 = rng.uniform(0.75, 0.95), peak1 = rng.uniform(0.5, 0.7);
  const Field tex = value_noise(s.size, 15, rng);
  for (std::size_t i = 0; i < s.size * s.size; ++i) {
    const double r_eff = radius * (1.0 + 0.2 * std::sin(lobes * s.angle(i, cx, cy) + phase));
    const double d = s.dist(i, cx, cy);
    if (d <= r_eff) {
      const double u = tex[i];
      s.band[kSwir2][i] = 0.65 + (peak2 - 0.65) * u;
      s.band[kSwir1][i] = 0.4 + (peak1 - 0.4) * u;
      s.band[kRed][i] = std::max(s.band[kRed][i], 0.08 + 0.08 * u);
    } else {
      // Glow fading over half a radius, strictly below the core.
      const double g = 0.8 * (1.0 - smoothstep(r_eff, 1.5 * r_eff, d));
      s.band[kSwir2][i] += (0.6 - s.band[kSwir2][i]) * g;
      s.band[kSwir1][i] += (0.38 - s.band[kSwir1][i]) * g;
    }
  }
}

void city(Scene& s, RngStream& rng) {
  const std::size_t block = 6 + static_cast<std::size_t>(rng.below(7));
  const std::size_t street = 1 + static_cast<std::size_t>(rng.below(2));
  const std::size_t pitch = block + street;
  const std::size_t cells = s.size / pitch + 1;
  std::vector<double> level(cells * cells);
  for (double& v : level) v = rng.uniform(0.08, 0.2);
  for (std::size_t i = 0; i < s.size * s.size; ++i) {
    const std::size_t x = i % s.size, y = i / s.size;
    const bool road = x % pitch >= block || y % pitch >= block;
    const double v = road ? 0.05 : level[(y / pitch) * cells + x / pitch];
    s.band[kBlue][i] = v * 0.9;
    s.band[kGreen][i] = v;
    s.band[kRed][i] = v * 1.05;
    s.band[kSwir1][i] = road ? 0.12 : v + 0.08;
    s.band[kSwir2][i] = road ? 0.08 : v + 0.04;
  }
}

void mountain(Scene& s, RngStream& rng) {
  const Field f = fbm(s.size, rng);
  const double snow_line = rng.uniform(0.55, 0.75);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double ridge = 1.0 - std::abs(2.0 * f[i] - 1.0);
    const double shade = 0.5 + 0.5 * ridge;
    const double snow = smoothstep(snow_line, snow_line + 0.1, ridge);
    for (std::size_t b = 0; b < kBandCount; ++b) s.band[b][i] *= shade;
    for (std::size_t b : {kBlue, kGreen, kRed}) s.band[b][i] = s.band[b][i] * (1 - snow) + 0.75 * snow;
    s.band[kSwir1][i] = s.band[kSwir1][i] * (1 - snow) + 0.08 * snow;
    s.band[kSwir2][i] = s.band[kSwir2][i] * (1 - snow) + 0.04 * snow;
  }
}

void noise(Scene& s, RngStream& rng) {
  const std::array<double, kBandCount> top = {0.4, 0.4, 0.4, 0.4, 0.3};
  for (std::size_t b = 0; b < kBandCount; ++b) {
    for (double& v : s.band[b]) v = rng.uniform(0.0, top[b]);
  }
}

std::string random_date(RngStream& rng) {
  const int year = 2015 + static_cast<int>(rng.below(5));
  const int month = 1 + static_cast<int>(rng.below(12));
  const int day = 1 + static_cast<int>(rng.below(28));
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

}  // namespace

SynthSample synth_sample(const std::string& subclass, std::size_t size, RngStream rng, const std::string& id) {
  if (size < 16) fail(ErrorCode::kInvalidParameter, "synthetic patch size must be at least 16");
  RngStream scene_rng = rng.fork("scene");
  Scene s = subclass == "random" ? Scene(size) : terrain(size, scene_rng);
  if (subclass == "eruption") {
    double cx = 0, cy = 0;
    add_cone(s, scene_rng, cx, cy);
    const double r = 12.0 * static_cast<double>(size) / 128.0;
    add_hotspot(s, scene_rng, cx, cy);
    if (scene_rng.uniform() < 0.3) add_clouds(s, scene_rng, scene_rng.uniform(0.2, 0.5), cx, cy, 2.0 * r);
  } else if (subclass == "volcano_quiet") {
    double cx = 0, cy = 0;
    add_cone(s, scene_rng, cx, cy);
    if (scene_rng.uniform() < 0.3) add_clouds(s, scene_rng, scene_rng.uniform(0.2, 0.5), 0, 0, 0);
  } else if (subclass == "city") {
    city(s, scene_rng);
  } else if (subclass == "mountain") {
    mountain(s, scene_rng);
  } else if (subclass == "cloudy") {
    add_clouds(s, scene_rng, scene_rng.uniform(0.55, 0.9), 0, 0, 0);
    for (double& v : s.band[kSwir2]) v = std::min(v, 0.2);
  } else if (subclass == "random") {
    noise(s, scene_rng);
  } else {
    fail(ErrorCode::kInvalidParameter, "unknown subclass '" + subclass + "'");
  }

  SynthSample out;
  out.patch.id = id;
  out.patch.sensor = Sensor::kSynthetic;
  for (std::size_t b = 0; b < kBandCount; ++b) {
    std::vector<float> values(size * size);
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = static_cast<float>(std::clamp(s.band[b][i], 0.0, 1.0));
    }
    out.patch.bands[b] = Tensor({size, size}, std::move(values));
  }
  RngStream meta_rng = rng.fork("meta");
  out.meta.id = id;
  out.meta.lat = std::round(meta_rng.uniform(-60.0, 70.0) * 1000.0) / 1000.0;
  out.meta.lon = std::round(meta_rng.uniform(-180.0, 180.0) * 1000.0) / 1000.0;
  out.meta.date = random_date(meta_rng);
  out.meta.label = subclass == "eruption" ? 1 : 0;
  out.meta.subclass = subclass;
  out.patch.center_lat = out.meta.lat;
  out.patch.center_lon = out.meta.lon;
  out.patch.acquired = out.meta.date;
  return out;
}

DatasetManifest synth_generate(std::size_t n_per_class, std::uint64_t seed, const std::filesystem::path& out,
                               const SynthOptions& options) {
  if (n_per_class < 1) fail(ErrorCode::kInvalidParameter, "n per class must be at least 1");
  options.fractions.validate();
  std::error_code ec;
  std::filesystem::create_directories(out / "samples", ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + (out / "samples").string() + ": " + ec.message());
  const RngStream base(seed);
  DatasetManifest manifest;
  char name[64];
  for (int label : {1, 0}) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::string subclass = label ? "eruption" : kNegativeSubclasses[i % kNegativeSubclasses.size()];
      std::snprintf(name, sizeof name, "%s_%04zu", subclass.c_str(), i);
      const SynthSample sample =
          synth_sample(subclass, options.size, base.fork(label ? "eruption" : "negative", i), name);
      const std::string rel = std::string("samples/") + name;
      write_patch(out / rel, sample.patch, sample.meta);
      manifest.samples.push_back({rel, label, subclass, Split::kTrain});
    }
  }
  std::sort(manifest.samples.begin(), manifest.samples.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  assign_splits(manifest.samples, options.fractions, seed);
  save_manifest(out / kManifestFileName, manifest);
  return manifest;
}

}  // namespace volc
