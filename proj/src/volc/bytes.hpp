#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "volc/error.hpp"

namespace volc {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(&v, sizeof v); }
  void u32(std::uint32_t v) { put(&v, sizeof v); }
  void f32(float v) { put(&v, sizeof v); }
  void raw(std::string_view s) { put(s.data(), s.size()); }
  void floats(const float* v, std::size_t n) { put(v, n * sizeof(float)); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

 private:
  void put(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked cursor. Running past the end raises `truncation_code` with
// the offset at which data ran out.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size, ErrorCode truncation_code, std::string what)
      : data_(data), size_(size), code_(truncation_code), what_(std::move(what)) {}

  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  float f32() { return get<float>(); }

  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + offset_), n);
    offset_ += n;
    return s;
  }

  void floats(float* out, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(out, data_ + offset_, n * sizeof(float));
    offset_ += n * sizeof(float);
  }

  std::size_t offset() const noexcept { return offset_; }
  std::size_t remaining() const noexcept { return size_ - offset_; }
  const std::string& what() const noexcept { return what_; }

 private:
  template <typename V>
  V get() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, data_ + offset_, sizeof(V));
    offset_ += sizeof(V);
    return v;
  }
  void need(std::size_t n) {
    if (n > size_ - offset_) {
      fail(code_, what_ + ": truncated at offset " + std::to_string(size_) + " (needed " +
                      std::to_string(n) + " bytes at offset " + std::to_string(offset_) + ")");
    }
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t offset_ = 0;
  ErrorCode code_;
  std::string what_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace volc
