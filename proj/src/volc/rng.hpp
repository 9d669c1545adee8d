#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace volc {

// SplitMix64 stream. The sequence depends only on the seed, so runs are
// reproducible across platforms. Consumers that must not interleave take a
// fork() keyed by a label instead of sharing one stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::vector<double> uniform_n(std::size_t n);

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection; n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double gaussian() noexcept;

  // Independent stream derived from (seed, label); does not consume state.
  RngStream fork(std::string_view label) const noexcept;
  RngStream fork(std::string_view label, std::uint64_t index) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace volc
