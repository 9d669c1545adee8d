#include "volc/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace volc {

const char* sensor_name(Sensor sensor) noexcept {
  switch (sensor) {
    case Sensor::kSentinel2: return "sentinel2";
    case Sensor::kLandsat7: return "landsat7";
    case Sensor::kSynthetic: return "synthetic";
  }
  return "unknown";
}

Sensor sensor_from_id(std::uint8_t id) {
  if (id > static_cast<std::uint8_t>(Sensor::kSynthetic)) {
    fail(ErrorCode::kFormat, "unknown sensor id " + std::to_string(id));
  }
  return static_cast<Sensor>(id);
}

Sensor parse_sensor(std::string_view name) {
  for (Sensor s : {Sensor::kSentinel2, Sensor::kLandsat7, Sensor::kSynthetic}) {
    if (name == sensor_name(s)) return s;
  }
  fail(ErrorCode::kInvalidParameter, "unknown sensor '" + std::string(name) + "'");
}

const char* band_name(std::size_t band) noexcept {
  static constexpr const char* kNames[kBandCount] = {"blue", "green", "red", "swir1", "swir2"};
  return band < kBandCount ? kNames[band] : "unknown";
}

void BandPatch::validate() const {
  for (std::size_t b = 0; b < kBandCount; ++b) {
    if (bands[b].rank() != 2) {
      fail(ErrorCode::kShape, std::string("band ") + band_name(b) + " must be [H, W], got " +
                                  shape_to_string(bands[b].shape()));
    }
    if (bands[b].shape() != bands[0].shape()) {
      fail(ErrorCode::kShape, std::string("band ") + band_name(b) + " shape " +
                                  shape_to_string(bands[b].shape()) + " differs from blue " +
                                  shape_to_string(bands[0].shape()));
    }
    if (!bands[b].all_finite()) {
      fail(ErrorCode::kShape, std::string("band ") + band_name(b) + " has non-finite values");
    }
  }
}

SensorProfile SensorProfile::sentinel2() {
  SensorProfile p;
  p.sensor = Sensor::kSentinel2;
  p.bands.fill({1.0 / 10000.0, 0.0});
  p.resolution_m = {10, 10, 10, 20, 20};
  return p;
}

SensorProfile SensorProfile::landsat7() {
  SensorProfile p;
  p.sensor = Sensor::kLandsat7;
  p.bands.fill({1.0 / 10000.0, 0.0});
  p.resolution_m = {30, 30, 30, 30, 30};
  return p;
}

SensorProfile SensorProfile::synthetic() {
  SensorProfile p;
  p.sensor = Sensor::kSynthetic;
  p.bands.fill({1.0, 0.0});
  p.resolution_m = {10, 10, 10, 10, 10};
  return p;
}

SensorProfile SensorProfile::for_sensor(Sensor sensor) {
  switch (sensor) {
    case Sensor::kSentinel2: return sentinel2();
    case Sensor::kLandsat7: return landsat7();
    case Sensor::kSynthetic: return synthetic();
  }
  fail(ErrorCode::kProfile, "no profile for sensor");
}

void SensorProfile::validate() const {
  for (std::size_t b = 0; b < kBandCount; ++b) {
    if (!(bands[b].scale > 0.0) || !std::isfinite(bands[b].scale) || !std::isfinite(bands[b].offset)) {
      fail(ErrorCode::kProfile,
           std::string("profile scale for ") + band_name(b) + " must be positive and finite");
    }
  }
}

namespace {

float clip01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

BandPatch normalize_sensor(const BandPatch& raw, const SensorProfile& profile) {
  profile.validate();
  if (raw.sensor != profile.sensor) {
    fail(ErrorCode::kProfile, std::string("patch sensor ") + sensor_name(raw.sensor) +
                                  " does not match profile " + sensor_name(profile.sensor));
  }
  raw.validate();
  BandPatch out = raw;
  for (std::size_t b = 0; b < kBandCount; ++b) {
    const BandAffine affine = profile.bands[b];
    for (float& v : out.bands[b].values()) v = clip01(v * affine.scale + affine.offset);
  }
  return out;
}

RgbComposite merge_bands(const BandPatch& patch, const CompositeAlpha& alpha) {
  patch.validate();
  const std::size_t h = patch.height(), w = patch.width(), plane = h * w;
  RgbComposite out{Tensor({3, h, w}), patch.id};
  const float* red = patch.bands[kRed].data();
  const float* green = patch.bands[kGreen].data();
  const float* blue = patch.bands[kBlue].data();
  const float* swir1 = patch.bands[kSwir1].data();
  const float* swir2 = patch.bands[kSwir2].data();
  float* r = out.pixels.data();
  float* g = r + plane;
  float* b = g + plane;
  for (std::size_t i = 0; i < plane; ++i) {
    r[i] = clip01(alpha.red * red[i] + std::max(0.0, swir2[i] - 0.1));
    g[i] = clip01(alpha.green * green[i] + std::max(0.0, swir1[i] - 0.1));
    b[i] = clip01(alpha.blue * blue[i]);
  }
  return out;
}

RgbComposite merge_bands(const BandPatch& patch, double alpha) {
  return merge_bands(patch, CompositeAlpha::uniform(alpha));
}

namespace {

constexpr double kCubicA = -0.75;

struct Taps {
  std::array<std::size_t, 4> index;
  std::array<double, 4> weight;
};

std::vector<Taps> cubic_taps(std::size_t in_size, std::size_t out_size) {
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  const auto last = static_cast<std::ptrdiff_t>(in_size) - 1;
  std::vector<Taps> taps(out_size);
  for (std::size_t d = 0; d < out_size; ++d) {
    const double f = (static_cast<double>(d) + 0.5) * scale - 0.5;
    const double base = std::floor(f);
    const double t = f - base;
    const double a = kCubicA;
    Taps& tp = taps[d];
    tp.weight[0] = ((a * (t + 1) - 5 * a) * (t + 1) + 8 * a) * (t + 1) - 4 * a;
    tp.weight[1] = ((a + 2) * t - (a + 3)) * t * t + 1;
    tp.weight[2] = ((a + 2) * (1 - t) - (a + 3)) * (1 - t) * (1 - t) + 1;
    tp.weight[3] = 1.0 - tp.weight[0] - tp.weight[1] - tp.weight[2];
    for (std::ptrdiff_t k = 0; k < 4; ++k) {
      const auto idx = static_cast<std::ptrdiff_t>(base) - 1 + k;
      tp.index[static_cast<std::size_t>(k)] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, last));
    }
  }
  return taps;
}

}  // namespace

Tensor bicubic_resize(const Tensor& image, std::size_t out_height, std::size_t out_width) {
  if (image.rank() != 3) {
    fail(ErrorCode::kShape, "bicubic_resize expects [C, H, W], got " + shape_to_string(image.shape()));
  }
  const std::size_t channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h < 4 || w < 4) {
    fail(ErrorCode::kTooSmall, "bicubic_resize needs at least 4x4 input, got " + std::to_string(h) +
                                   "x" + std::to_string(w));
  }
  if (out_height == 0 || out_width == 0) {
    fail(ErrorCode::kInvalidShape, "bicubic_resize target must be positive");
  }
  const auto xtaps = cubic_taps(w, out_width);
  const auto ytaps = cubic_taps(h, out_height);
  Tensor out({channels, out_height, out_width});
  std::vector<double> rows(h * out_width);
  for (std::size_t c = 0; c < channels; ++c) {
    const float* src = image.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      const float* row = src + y * w;
      for (std::size_t x = 0; x < out_width; ++x) {
        const Taps& tp = xtaps[x];
        double v = 0.0;
        for (std::size_t k = 0; k < 4; ++k) v += tp.weight[k] * row[tp.index[k]];
        rows[y * out_width + x] = v;
      }
    }
    float* dst = out.data() + c * out_height * out_width;
    for (std::size_t y = 0; y < out_height; ++y) {
      const Taps& tp = ytaps[y];
      for (std::size_t x = 0; x < out_width; ++x) {
        double v = 0.0;
        for (std::size_t k = 0; k < 4; ++k) v += tp.weight[k] * rows[tp.index[k] * out_width + x];
        dst[y * out_width + x] = clip01(v);
      }
    }
  }
  return out;
}

RgbComposite prepare_composite(const BandPatch& raw, const SensorProfile& profile,
                               const CompositeAlpha& alpha, std::size_t size) {
  RgbComposite merged = merge_bands(normalize_sensor(raw, profile), alpha);
  merged.pixels = bicubic_resize(merged.pixels, size, size);
  return merged;
}

Tensor add_gaussian_noise(const Tensor& image, double sigma, RngStream& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::kInvalidParameter, "noise sigma must be a finite value >= 0");
  }
  Tensor out = image;
  if (sigma == 0.0) return out;
  for (float& v : out.values()) v = clip01(v + sigma * rng.gaussian());
  return out;
}

// ------------------------------------------------------------ symmetries

namespace {

// Maps output pixel coordinates (centred, x right, y down) to input ones:
// x_in = m[0]*x + m[1]*y, y_in = m[2]*x + m[3]*y.
using Mat2 = std::array<int, 4>;

constexpr std::array<Mat2, 8> kSymmetryMats = {{
    {1, 0, 0, 1},    // identity
    {0, -1, 1, 0},   // rot90
    {-1, 0, 0, -1},  // rot180
    {0, 1, -1, 0},   // rot270
    {-1, 0, 0, 1},   // flip h
    {1, 0, 0, -1},   // flip v
    {0, 1, 1, 0},    // transpose
    {0, -1, -1, 0},  // anti-transpose
}};

Mat2 mul(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

Symmetry symmetry_of(const Mat2& m) {
  for (std::size_t i = 0; i < kSymmetryMats.size(); ++i) {
    if (kSymmetryMats[i] == m) return static_cast<Symmetry>(i);
  }
  fail(ErrorCode::kInternal, "not a symmetry of the square");
}

bool swaps_axes(Symmetry s) { return kSymmetryMats[static_cast<std::size_t>(s)][0] == 0; }

}  // namespace

const char* symmetry_name(Symmetry s) noexcept {
  switch (s) {
    case Symmetry::kIdentity: return "identity";
    case Symmetry::kRot90: return "rot90";
    case Symmetry::kRot180: return "rot180";
    case Symmetry::kRot270: return "rot270";
    case Symmetry::kFlipH: return "hflip";
    case Symmetry::kFlipV: return "vflip";
    case Symmetry::kTranspose: return "transpose";
    case Symmetry::kAntiTranspose: return "antitranspose";
  }
  return "unknown";
}

Tensor apply_symmetry(const Tensor& image, Symmetry s) {
  if (image.rank() < 2) {
    fail(ErrorCode::kShape, "symmetry needs at least two axes, got " + shape_to_string(image.shape()));
  }
  const std::size_t rank = image.rank();
  const std::size_t h = image.dim(rank - 2), w = image.dim(rank - 1);
  if (swaps_axes(s) && h != w) {
    fail(ErrorCode::kShape, std::string(symmetry_name(s)) + " needs a square image, got " +
                                shape_to_string(image.shape()));
  }
  if (s == Symmetry::kIdentity) return image;
  const Mat2& m = kSymmetryMats[static_cast<std::size_t>(s)];
  const std::size_t planes = image.size() / (h * w);
  const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);
  // Index maps computed once in doubled centred coordinates to stay integral.
  std::vector<std::size_t> source(h * w);
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    for (std::ptrdiff_t x = 0; x < iw; ++x) {
      const std::ptrdiff_t cx = 2 * x - (iw - 1), cy = 2 * y - (ih - 1);
      const std::ptrdiff_t sx = (m[0] * cx + m[1] * cy + (iw - 1)) / 2;
      const std::ptrdiff_t sy = (m[2] * cx + m[3] * cy + (ih - 1)) / 2;
      source[static_cast<std::size_t>(y * iw + x)] = static_cast<std::size_t>(sy * iw + sx);
    }
  }
  Tensor out(image.shape());
  for (std::size_t p = 0; p < planes; ++p) {
    const float* src = image.data() + p * h * w;
    float* dst = out.data() + p * h * w;
    for (std::size_t i = 0; i < h * w; ++i) dst[i] = src[source[i]];
  }
  return out;
}

Tensor hflip(const Tensor& image) { return apply_symmetry(image, Symmetry::kFlipH); }
Tensor vflip(const Tensor& image) { return apply_symmetry(image, Symmetry::kFlipV); }
Tensor rot90(const Tensor& image) { return apply_symmetry(image, Symmetry::kRot90); }

Tensor augment(const Tensor& image, RngStream& rng, const AugmentOps& ops, Symmetry* chosen) {
  std::vector<Mat2> generators;
  if (ops.hflip) generators.push_back(kSymmetryMats[static_cast<std::size_t>(Symmetry::kFlipH)]);
  if (ops.vflip) generators.push_back(kSymmetryMats[static_cast<std::size_t>(Symmetry::kFlipV)]);
  if (ops.rot90) generators.push_back(kSymmetryMats[static_cast<std::size_t>(Symmetry::kRot90)]);
  std::array<bool, 8> member{};
  member[0] = true;
  for (bool grew = true; grew;) {
    grew = false;
    for (std::size_t i = 0; i < member.size(); ++i) {
      if (!member[i]) continue;
      for (const Mat2& g : generators) {
        const auto j = static_cast<std::size_t>(symmetry_of(mul(kSymmetryMats[i], g)));
        if (!member[j]) member[j] = grew = true;
      }
    }
  }
  std::vector<Symmetry> group;
  for (std::size_t i = 0; i < member.size(); ++i) {
    if (member[i]) group.push_back(static_cast<Symmetry>(i));
  }
  const std::size_t rank = image.rank();
  if (rank >= 2 && image.dim(rank - 2) != image.dim(rank - 1) &&
      std::any_of(group.begin(), group.end(), swaps_axes)) {
    fail(ErrorCode::kShape, "rot90 augmentation needs a square image, got " + shape_to_string(image.shape()));
  }
  const Symmetry s = group[rng.below(group.size())];
  if (chosen) *chosen = s;
  return apply_symmetry(image, s);
}

}  // namespace volc
