#include "volc/patch_io.hpp"

#include <limits>
#include <json.hpp>

#include "volc/bytes.hpp"

namespace volc {
namespace {

using nlohmann::json;

void check_dims(std::size_t h, std::size_t w) {
  constexpr std::size_t kMax = std::numeric_limits<std::uint16_t>::max();
  if (h > kMax || w > kMax) {
    fail(ErrorCode::kInvalidShape, "patch dims exceed the u16 header field");
  }
}

std::vector<std::uint8_t> encode_planes(std::string_view magic, std::size_t h, std::size_t w,
                                        Sensor sensor, std::span<const Tensor> planes) {
  check_dims(h, w);
  ByteWriter out;
  out.raw(magic);
  out.u16(static_cast<std::uint16_t>(h));
  out.u16(static_cast<std::uint16_t>(w));
  out.u8(static_cast<std::uint8_t>(sensor));
  for (const Tensor& t : planes) out.floats(t.data(), t.size());
  return std::move(out.bytes());
}

struct Header {
  std::size_t h, w;
  Sensor sensor;
};

Header decode_header(ByteReader& in, std::string_view magic) {
  const std::string got = in.raw(magic.size());
  if (got != magic) {
    fail(ErrorCode::kFormat, in.what() + ": bad magic at offset 0, expected " + std::string(magic));
  }
  Header hd{in.u16(), in.u16(), Sensor::kSynthetic};
  const std::size_t sensor_offset = in.offset();
  const std::uint8_t id = in.u8();
  if (id > static_cast<std::uint8_t>(Sensor::kSynthetic)) {
    fail(ErrorCode::kFormat, in.what() + ": unknown sensor id " + std::to_string(id) + " at offset " +
                                 std::to_string(sensor_offset));
  }
  hd.sensor = static_cast<Sensor>(id);
  if (hd.h == 0 || hd.w == 0) fail(ErrorCode::kFormat, in.what() + ": zero image dimension");
  return hd;
}

void expect_end(const ByteReader& in) {
  if (in.remaining() != 0) {
    fail(ErrorCode::kFormat, in.what() + ": " + std::to_string(in.remaining()) +
                                 " trailing bytes at offset " + std::to_string(in.offset()));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_band_patch(const BandPatch& patch) {
  patch.validate();
  return encode_planes("VBP1", patch.height(), patch.width(), patch.sensor, patch.bands);
}

BandPatch decode_band_patch(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes.data(), bytes.size(), ErrorCode::kFormat, "band patch");
  const Header hd = decode_header(in, "VBP1");
  BandPatch patch;
  patch.sensor = hd.sensor;
  for (Tensor& band : patch.bands) {
    band = Tensor({hd.h, hd.w});
    in.floats(band.data(), band.size());
  }
  expect_end(in);
  return patch;
}

std::string meta_to_json(const PatchMeta& meta) {
  json j;
  j["id"] = meta.id;
  j["lat"] = meta.lat;
  j["lon"] = meta.lon;
  j["date"] = meta.date;
  j["label"] = meta.label ? json(*meta.label) : json(nullptr);
  j["subclass"] = meta.subclass;
  return j.dump(2) + "\n";
}

PatchMeta meta_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("meta.json: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kParse, "meta.json: expected an object");
  PatchMeta meta;
  try {
    meta.id = j.value("id", "");
    meta.lat = j.value("lat", 0.0);
    meta.lon = j.value("lon", 0.0);
    meta.date = j.value("date", "");
    meta.subclass = j.value("subclass", "");
    if (j.contains("label") && !j["label"].is_null()) {
      const int label = j["label"].get<int>();
      if (label != 0 && label != 1) fail(ErrorCode::kParse, "meta.json: label must be 0, 1 or null");
      meta.label = label;
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("meta.json: ") + e.what());
  }
  return meta;
}

void write_patch(const std::filesystem::path& dir, const BandPatch& patch, const PatchMeta& meta) {
  write_file(dir / kBandFileName, encode_band_patch(patch));
  write_text(dir / kMetaFileName, meta_to_json(meta));
}

PatchMeta read_patch_meta(const std::filesystem::path& dir) {
  return meta_from_json(read_text(dir / kMetaFileName));
}

BandPatch read_patch(const std::filesystem::path& dir) {
  BandPatch patch = decode_band_patch(read_file(dir / kBandFileName));
  const PatchMeta meta = read_patch_meta(dir);
  patch.id = meta.id.empty() ? dir.filename().string() : meta.id;
  patch.center_lat = meta.lat;
  patch.center_lon = meta.lon;
  patch.acquired = meta.date;
  return patch;
}

void write_composite(const std::filesystem::path& file, const RgbComposite& composite, Sensor sensor) {
  const Tensor& px = composite.pixels;
  if (px.rank() != 3 || px.dim(0) != 3) {
    fail(ErrorCode::kShape, "composite must be [3, H, W], got " + shape_to_string(px.shape()));
  }
  const std::size_t h = px.dim(1), w = px.dim(2);
  std::array<Tensor, 3> planes;
  for (std::size_t c = 0; c < 3; ++c) {
    planes[c] = Tensor({h, w}, std::vector<float>(px.data() + c * h * w, px.data() + (c + 1) * h * w));
  }
  write_file(file, encode_planes("VRC1", h, w, sensor, planes));
}

RgbComposite read_composite(const std::filesystem::path& file) {
  const auto bytes = read_file(file);
  ByteReader in(bytes.data(), bytes.size(), ErrorCode::kFormat, "composite " + file.string());
  const Header hd = decode_header(in, "VRC1");
  RgbComposite out{Tensor({3, hd.h, hd.w}), file.parent_path().filename().string()};
  in.floats(out.pixels.data(), out.pixels.size());
  expect_end(in);
  return out;
}

}  // namespace volc
