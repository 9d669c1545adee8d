#include "volc/model_io.hpp"

#include <zlib.h>

#include <cmath>
#include <string_view>

#include "volc/bytes.hpp"

namespace volc {
namespace {

constexpr std::string_view kMagic = "VOLCM01";
constexpr std::size_t kMaxRank = 8;

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

bool known_tag(std::uint8_t tag) {
  return tag >= static_cast<std::uint8_t>(LayerKind::kConv2d) && tag <= static_cast<std::uint8_t>(LayerKind::kSigmoid);
}

std::string at(std::size_t offset) { return " at offset " + std::to_string(offset); }

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelSpec& spec, const ModelWeights& weights) {
  infer_shapes(spec);
  const auto shapes = weight_shapes(spec);
  if (shapes.size() != weights.tensors.size()) {
    fail(ErrorCode::kIntegrity, "model has " + std::to_string(weights.tensors.size()) + " tensors, spec needs " +
                                    std::to_string(shapes.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (weights.tensors[i].shape() != shapes[i]) {
      fail(ErrorCode::kIntegrity, "tensor " + std::to_string(i) + " has shape " +
                                      shape_to_string(weights.tensors[i].shape()) + ", spec needs " +
                                      shape_to_string(shapes[i]));
    }
  }
  if (spec.name.size() > 255) fail(ErrorCode::kInvalidParameter, "model name longer than 255 bytes");

  ByteWriter out;
  out.raw(kMagic);
  out.u8(static_cast<std::uint8_t>(spec.name.size()));
  out.raw(spec.name);
  for (std::uint32_t d : spec.input) out.u32(d);
  out.u32(static_cast<std::uint32_t>(spec.layers.size()));
  for (const LayerDesc& l : spec.layers) {
    out.u8(static_cast<std::uint8_t>(l.kind));
    out.u32(l.units);
    out.u32(l.kernel);
    out.f32(l.rate);
  }
  out.u32(static_cast<std::uint32_t>(weights.tensors.size()));
  for (const Tensor& t : weights.tensors) {
    out.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
  }
  for (const Tensor& t : weights.tensors) out.floats(t.data(), t.size());
  const std::uint32_t crc = crc32_of(out.bytes().data(), out.bytes().size());
  out.u32(crc);
  return std::move(out.bytes());
}

Model decode_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagic.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kMagic.size()) != kMagic) {
    fail(ErrorCode::kFormat, "model: bad magic" + at(0) + ", expected VOLCM01");
  }
  ByteReader in(bytes.data(), bytes.size(), ErrorCode::kIntegrity, "model");
  in.raw(kMagic.size());

  Model model;
  const std::uint8_t name_len = in.u8();
  model.spec.name = in.raw(name_len);
  for (auto& d : model.spec.input) d = in.u32();

  const std::size_t layer_count_offset = in.offset();
  const std::uint32_t layer_count = in.u32();
  // Each layer record takes 13 bytes; reject counts the file cannot hold
  // before allocating.
  if (static_cast<std::uint64_t>(layer_count) * 13 > in.remaining()) {
    fail(ErrorCode::kIntegrity, "model: layer table of " + std::to_string(layer_count) +
                                    " entries overruns the file" + at(layer_count_offset));
  }
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::size_t offset = in.offset();
    const std::uint8_t tag = in.u8();
    if (!known_tag(tag)) {
      fail(ErrorCode::kFormat, "model: unknown layer tag " + std::to_string(tag) + at(offset));
    }
    LayerDesc l{static_cast<LayerKind>(tag)};
    l.units = in.u32();
    l.kernel = in.u32();
    l.rate = in.f32();
    if (!std::isfinite(l.rate)) fail(ErrorCode::kFormat, "model: non-finite dropout rate" + at(offset));
    model.spec.layers.push_back(l);
  }

  const std::size_t table_offset = in.offset();
  const std::uint32_t tensor_count = in.u32();
  if (static_cast<std::uint64_t>(tensor_count) > in.remaining()) {
    fail(ErrorCode::kIntegrity, "model: tensor table of " + std::to_string(tensor_count) +
                                    " entries overruns the file" + at(table_offset));
  }
  std::vector<Shape> table;
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const std::size_t offset = in.offset();
    const std::uint8_t rank = in.u8();
    if (rank == 0 || rank > kMaxRank) {
      fail(ErrorCode::kFormat, "model: tensor rank " + std::to_string(rank) + at(offset));
    }
    Shape shape(rank);
    for (auto& d : shape) {
      d = in.u32();
      if (d == 0) fail(ErrorCode::kFormat, "model: zero tensor dimension" + at(offset));
    }
    table.push_back(std::move(shape));
  }

  std::vector<Shape> expected;
  try {
    infer_shapes(model.spec);
    expected = weight_shapes(model.spec);
  } catch (const Error& e) {
    fail(ErrorCode::kIntegrity, std::string("model: layer list is inconsistent: ") + e.what());
  }
  if (expected != table) {
    std::string detail = "model: shape table does not match the layer list" + at(table_offset);
    for (std::size_t i = 0; i < std::min(expected.size(), table.size()); ++i) {
      if (expected[i] != table[i]) {
        detail += " (tensor " + std::to_string(i) + " is " + shape_to_string(table[i]) + ", layers imply " +
                  shape_to_string(expected[i]) + ")";
        break;
      }
    }
    if (expected.size() != table.size()) {
      detail += " (" + std::to_string(table.size()) + " tensors, layers imply " + std::to_string(expected.size()) + ")";
    }
    fail(ErrorCode::kIntegrity, detail);
  }

  std::uint64_t total = 0;
  for (const Shape& s : table) total += checked_element_count(s);
  if (total * sizeof(float) > in.remaining()) {
    fail(ErrorCode::kIntegrity, "model: tensor data truncated, file ends at offset " +
                                    std::to_string(bytes.size()) + " but data needs " +
                                    std::to_string(total * sizeof(float)) + " bytes from offset " +
                                    std::to_string(in.offset()));
  }
  for (const Shape& s : table) {
    Tensor t(s);
    in.floats(t.data(), t.size());
    model.weights.tensors.push_back(std::move(t));
  }

  const std::size_t crc_offset = in.offset();
  const std::uint32_t stored = in.u32();
  const std::uint32_t actual = crc32_of(bytes.data(), crc_offset);
  if (stored != actual) {
    fail(ErrorCode::kChecksum, "model: checksum mismatch" + at(crc_offset));
  }
  if (in.remaining() != 0) {
    fail(ErrorCode::kFormat, "model: " + std::to_string(in.remaining()) + " trailing bytes" + at(in.offset()));
  }
  return model;
}

std::size_t save_model(const ModelSpec& spec, const ModelWeights& weights, const std::filesystem::path& path) {
  const auto bytes = encode_model(spec, weights);
  write_file(path, bytes);
  return bytes.size();
}

Model load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace volc
