#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>

#include "volc/error.hpp"
#include "volc/rng.hpp"
#include "volc/tensor.hpp"

using namespace volc;

TEST_SUITE("tensor_core") {
  TEST_CASE("construction and fills") {
    const Tensor z = Tensor::zeros({2, 2});
    CHECK(z.shape() == Shape{2, 2});
    for (float v : z.values()) CHECK(v == 0.0f);
    const Tensor f = Tensor::full({3}, 1.5f);
    for (float v : f.values()) CHECK(v == 1.5f);
    CHECK(Tensor::ones({4, 1})[3] == 1.0f);
  }

  TEST_CASE("degenerate shapes are invalid-shape errors") {
    auto code_of = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::kInternal;
    };
    CHECK(code_of([] { Tensor t({2, 0}); }) == ErrorCode::kInvalidShape);
    CHECK(code_of([] { Tensor t(Shape{}); }) == ErrorCode::kInvalidShape);
    CHECK(code_of([] { Tensor t({2, 2}, std::vector<float>(3)); }) == ErrorCode::kInvalidShape);
    Tensor t({2, 3});
    CHECK(code_of([&] { t.reshape({4, 2}); }) == ErrorCode::kInvalidShape);
    t.reshape({3, 2});
    CHECK(t.shape() == Shape{3, 2});
  }

  TEST_CASE("row-major offsets match a nested-loop oracle") {
    for (const Shape& s : {Shape{3}, Shape{2, 5}, Shape{3, 4, 5}, Shape{2, 3, 4, 5}}) {
      Tensor64 t(s);
      std::vector<std::size_t> idx(s.size(), 0);
      std::size_t expected = 0;
      // Nested loops of depth rank; the innermost axis varies fastest.
      std::function<void(std::size_t)> walk = [&](std::size_t axis) {
        if (axis == s.size()) {
          CHECK(t.offset(idx) == expected++);
          return;
        }
        for (idx[axis] = 0; idx[axis] < s[axis]; ++idx[axis]) walk(axis + 1);
      };
      walk(0);
      CHECK(expected == t.size());
    }
    Tensor t({2, 2});
    CHECK_THROWS_AS(t.at({2, 0}), Error);
    CHECK_THROWS_AS(t.at({1}), Error);
  }

  TEST_CASE("splitmix64 reference sequence") {
    RngStream zero(0);
    CHECK(zero.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(zero.next_u64() == 0x6e789e6aa1b965f4ULL);
    CHECK(zero.next_u64() == 0x06c45d188009454fULL);
    RngStream s42(42);
    CHECK(s42.next_u64() == 0xbdd732262feb6e95ULL);
    CHECK(s42.next_u64() == 0x28efe333b266f103ULL);
  }

  TEST_CASE("uniform_n is reproducible and advances the stream by n") {
    RngStream a(42), b(42);
    CHECK(a.uniform_n(3) == b.uniform_n(3));
    RngStream c(42);
    CHECK(c.uniform_n(0).empty());
    RngStream fresh(42);
    CHECK(c.next_u64() == fresh.next_u64());
    RngStream d(42), e(42);
    d.uniform_n(5);
    for (int i = 0; i < 5; ++i) e.next_u64();
    CHECK(d.next_u64() == e.next_u64());
  }

  TEST_CASE("uniform mean over 1e5 draws") {
    RngStream rng(42);
    const auto v = rng.uniform_n(100000);
    double sum = 0.0;
    for (double x : v) {
      CHECK_UNARY(x >= 0.0);
      CHECK_UNARY(x < 1.0);
      sum += x;
    }
    CHECK(sum / 1e5 >= 0.49);
    CHECK(sum / 1e5 <= 0.51);
  }

  TEST_CASE("gaussian moments over 1e6 draws") {
    RngStream rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gaussian();
      sum += g;
      sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
  }

  TEST_CASE("below is in range and covers every value") {
    RngStream rng(3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const auto v = rng.below(7);
      CHECK(v < 7);
      seen.insert(v);
    }
    CHECK(seen.size() == 7);
  }

  TEST_CASE("forks are independent of parent consumption and of each other") {
    RngStream parent(99);
    const RngStream before = parent.fork("augment");
    parent.next_u64();
    RngStream after = parent.fork("augment");
    RngStream b = before;
    CHECK(b.next_u64() == after.next_u64());
    CHECK(parent.fork("a").next_u64() != parent.fork("b").next_u64());
    CHECK(parent.fork("a", 0).next_u64() != parent.fork("a", 1).next_u64());
  }
}
