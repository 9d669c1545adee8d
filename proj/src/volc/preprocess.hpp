#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "volc/rng.hpp"
#include "volc/tensor.hpp"

namespace volc {

// Wire ids are stored in patch files.
enum class Sensor : std::uint8_t { kSentinel2 = 0, kLandsat7 = 1, kSynthetic = 2 };

const char* sensor_name(Sensor sensor) noexcept;
Sensor sensor_from_id(std::uint8_t id);
Sensor parse_sensor(std::string_view name);

inline constexpr std::size_t kBandCount = 5;
enum Band : std::size_t { kBlue = 0, kGreen = 1, kRed = 2, kSwir1 = 3, kSwir2 = 4 };
const char* band_name(std::size_t band) noexcept;

struct BandPatch {
  std::string id;
  Sensor sensor = Sensor::kSynthetic;
  double center_lat = 0.0;
  double center_lon = 0.0;
  std::string acquired;           // ISO-8601 date
  std::array<Tensor, kBandCount> bands;  // each [H, W]

  std::size_t height() const { return bands[0].dim(0); }
  std::size_t width() const { return bands[0].dim(1); }

  // Five rank-2 planes of one shape with finite values; kShape otherwise.
  void validate() const;
};

struct BandAffine {
  double scale = 1.0 / 10000.0;
  double offset = 0.0;
};

struct SensorProfile {
  Sensor sensor = Sensor::kSentinel2;
  std::array<BandAffine, kBandCount> bands{};
  std::array<double, kBandCount> resolution_m{};

  // TOA reflectance stored as DN = 10000 * reflectance.
  static SensorProfile sentinel2();
  // Level-2 surface reflectance; the affine is configurable, default 1/10000.
  static SensorProfile landsat7();
  // Generator output is already reflectance.
  static SensorProfile synthetic();
  static SensorProfile for_sensor(Sensor sensor);

  void validate() const;
};

// reflectance = raw * scale + offset, clipped to [0, 1].
BandPatch normalize_sensor(const BandPatch& raw, const SensorProfile& profile);

inline constexpr double kDefaultAlpha = 2.5;

// One scale factor per output channel; `uniform` is the usual single alpha.
struct CompositeAlpha {
  double red = kDefaultAlpha;
  double green = kDefaultAlpha;
  double blue = kDefaultAlpha;

  static CompositeAlpha uniform(double alpha) { return {alpha, alpha, alpha}; }
};

struct RgbComposite {
  Tensor pixels;  // [3, H, W], channels R, G, B, values in [0, 1]
  std::string source_id;
};

// RED   = a*red   + max(0, swir2 - 0.1)
// GREEN = a*green + max(0, swir1 - 0.1)
// BLUE  = a*blue
// each clipped to [0, 1].
RgbComposite merge_bands(const BandPatch& patch, const CompositeAlpha& alpha = {});
RgbComposite merge_bands(const BandPatch& patch, double alpha);

inline constexpr std::size_t kCompositeSize = 512;

// Cubic convolution (a = -0.75), half-pixel centre mapping, clamped edges,
// output clipped to [0, 1]. Input [C, H, W] with H, W >= 4.
Tensor bicubic_resize(const Tensor& image, std::size_t out_height, std::size_t out_width);

// normalize -> merge -> resize to size x size.
RgbComposite prepare_composite(const BandPatch& raw, const SensorProfile& profile,
                               const CompositeAlpha& alpha = {}, std::size_t size = kCompositeSize);

// Adds N(0, sigma^2) per element and clips to [0, 1].
Tensor add_gaussian_noise(const Tensor& image, double sigma, RngStream& rng);

// The eight symmetries of the square, acting on the last two axes.
enum class Symmetry : std::uint8_t {
  kIdentity,
  kRot90,
  kRot180,
  kRot270,
  kFlipH,
  kFlipV,
  kTranspose,
  kAntiTranspose,
};

const char* symmetry_name(Symmetry s) noexcept;
Tensor apply_symmetry(const Tensor& image, Symmetry s);
Tensor hflip(const Tensor& image);
Tensor vflip(const Tensor& image);
// Quarter turn counter-clockwise.
Tensor rot90(const Tensor& image);

struct AugmentOps {
  bool hflip = true;
  bool vflip = true;
  bool rot90 = true;
};

// Applies one element, chosen uniformly, of the group generated by the
// enabled operations (identity included). Groups containing a quarter turn
// need a square image.
Tensor augment(const Tensor& image, RngStream& rng, const AugmentOps& ops = {},
               Symmetry* chosen = nullptr);

}  // namespace volc
