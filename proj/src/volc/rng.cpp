#include "volc/rng.hpp"

#include <cmath>
#include <numbers>

namespace volc {
namespace {

std::uint64_t mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::vector<double> RngStream::uniform_n(std::size_t n) {
  std::vector<double> out(n);
  for (double& v : out) v = uniform();
  return out;
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double RngStream::gaussian() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

RngStream RngStream::fork(std::string_view label) const noexcept {
  return RngStream(mix(seed_ ^ mix(fnv1a(label))));
}

RngStream RngStream::fork(std::string_view label, std::uint64_t index) const noexcept {
  return RngStream(mix(seed_ ^ mix(fnv1a(label) + 0x9E3779B97F4A7C15ULL * (index + 1))));
}

}  // namespace volc
