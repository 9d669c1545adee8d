#include <doctest.h>

#include <numeric>

#include "test_util.hpp"
#include "volc/models.hpp"

using namespace volc;
using testutil::thrown_code;

namespace {

// Closed-form counts for a stack of 3x3 conv blocks (conv + batchnorm,
// each followed by a 2x2 pool) and a dense chain, built from plain arrays.
struct Counts {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

Counts hand_count(std::vector<std::uint64_t> filters, std::vector<std::uint64_t> widths, std::uint64_t side) {
  Counts c;
  std::uint64_t in = 3;
  for (std::uint64_t out : filters) {
    c.params += out * in * 9 + out + 2 * out;
    c.macs += side * side * out * in * 9;
    side /= 2;
    in = out;
  }
  for (std::uint64_t w : widths) {
    c.params += w * in + w;
    c.macs += w * in;
    in = w;
  }
  return c;
}

std::uint64_t trainable_elements(const ModelSpec& spec) {
  RngStream rng(1);
  Network<float> net(spec, init_weights(spec, rng));
  std::uint64_t n = 0;
  for (const auto& p : net.trainable()) n += p.value->size();
  return n;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("big model spatial trace and widths") {
    const ModelSpec big = build_big();
    CHECK(spatial_trace(big) == std::vector<std::size_t>{512, 256, 128, 64, 32, 16, 8, 4});
    const auto shapes = infer_shapes(big);
    for (std::size_t i = 0; i < big.layers.size(); ++i) {
      if (big.layers[i].kind == LayerKind::kGlobalAvgPool) CHECK(shapes[i] == Shape{512});
    }
    CHECK(shapes.back() == Shape{1});
    CHECK(big.layers.back().kind == LayerKind::kSigmoid);
  }

  TEST_CASE("small model spatial trace and widths") {
    const ModelSpec small = build_small();
    CHECK(spatial_trace(small) == std::vector<std::size_t>{512, 256, 128, 64, 32});
    const auto shapes = infer_shapes(small);
    for (std::size_t i = 0; i < small.layers.size(); ++i) {
      if (small.layers[i].kind == LayerKind::kGlobalAvgPool) CHECK(shapes[i] == Shape{256});
    }
    std::size_t dense = 0, dropout = 0;
    for (const auto& l : small.layers) {
      dense += l.kind == LayerKind::kDense;
      dropout += l.kind == LayerKind::kDropout;
    }
    CHECK(dense == 2);
    CHECK(dropout == 1);
  }

  TEST_CASE("hand parameter counts") {
    // Pooling a [10,1,1] input gives a width-10 vector for the dense layer.
    const ModelSpec dense{"d", {10, 1, 1}, {{LayerKind::kGlobalAvgPool}, {LayerKind::kDense, 1}, {LayerKind::kSigmoid}}};
    CHECK(param_count(dense) == 11);
    const ModelSpec conv{"c", {3, 8, 8},
                         {{LayerKind::kConv2d, 16, 3}, {LayerKind::kGlobalAvgPool}, {LayerKind::kDense, 1},
                          {LayerKind::kSigmoid}}};
    CHECK(layer_costs(conv)[0].params == 448);
    CHECK(layer_costs(conv)[0].macs == 8 * 8 * 16 * 3 * 9);
  }

  TEST_CASE("closed-form counts match a hand derivation and frozen values") {
    const Counts big = hand_count({16, 32, 64, 128, 256, 512, 512}, {256, 128, 64, 32, 1}, 512);
    const Counts small = hand_count({32, 64, 128, 256}, {64, 1}, 512);
    CHECK(param_count(build_big()) == big.params);
    CHECK(flop_count(build_big()) == big.macs);
    CHECK(param_count(build_small()) == small.params);
    CHECK(flop_count(build_small()) == small.macs);
    CHECK(big.params == 4110209);
    CHECK(big.macs == 1774364704);
    CHECK(small.params == 405889);
    CHECK(small.macs == 3850387520);
    CHECK(param_count(build_small()) < param_count(build_big()));
  }

  TEST_CASE("parameter counts equal the enumerated trainable tensors") {
    // Counts do not depend on input size, so a small input keeps this cheap.
    CHECK(trainable_elements(build_big(128)) == param_count(build_big()));
    CHECK(trainable_elements(build_small(64)) == param_count(build_small()));
    std::uint64_t per_layer = 0;
    for (const auto& c : layer_costs(build_big())) per_layer += c.params;
    CHECK(per_layer == param_count(build_big()));
  }

  TEST_CASE("small conv kernels are shaped like big layers 2-5") {
    const auto big = weight_shapes(build_big());
    const auto small = weight_shapes(build_small());
    // Conv kernels sit at offsets 0, 6, 12, ... (conv w, b, then 4 batchnorm tensors).
    for (std::size_t k = 0; k < 4; ++k) {
      const Shape& s = small[k * 6];
      const Shape& b = big[(k + 1) * 6];
      CHECK(s[0] == b[0]);
      CHECK(s[2] == b[2]);
      CHECK(s[3] == b[3]);
      if (k == 0) {
        CHECK(s[1] == 3);
        CHECK(b[1] == 16);
      } else {
        CHECK(s == b);
      }
    }
  }

  TEST_CASE("weights match their spec and init is deterministic") {
    const ModelSpec spec = build_small(64);
    RngStream a(3), b(3);
    const ModelWeights wa = init_weights(spec, a);
    CHECK(wa == init_weights(spec, b));
    const auto shapes = weight_shapes(spec);
    REQUIRE(wa.tensors.size() == shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i) CHECK(wa.tensors[i].shape() == shapes[i]);
  }

  TEST_CASE("forward output lies strictly inside (0,1)") {
    const ModelSpec spec = build_big(128);
    RngStream rng(11);
    const Network<float> net(spec, init_weights(spec, rng));
    Tensor x({2, 3, 128, 128});
    for (float& v : x.values()) v = static_cast<float>(rng.uniform());
    const Tensor y = net.infer(x);
    REQUIRE(y.shape() == Shape{2, 1});
    for (float v : y.values()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }

  TEST_CASE("shape validation rejects incompatible specs") {
    CHECK(thrown_code([] { build_big(64); }) == ErrorCode::kShape);
    CHECK(thrown_code([] { build_named("medium"); }) == ErrorCode::kInvalidParameter);
    ModelSpec no_sigmoid{"x", {3, 8, 8}, {{LayerKind::kGlobalAvgPool}, {LayerKind::kDense, 1}}};
    CHECK(thrown_code([&] { infer_shapes(no_sigmoid); }) == ErrorCode::kShape);
    ModelSpec dense_on_map{"x", {3, 8, 8}, {{LayerKind::kDense, 1}, {LayerKind::kSigmoid}}};
    CHECK(thrown_code([&] { infer_shapes(dense_on_map); }) == ErrorCode::kShape);
    for (std::uint32_t size : {32u, 64u, 128u, 512u}) CHECK_NOTHROW(infer_shapes(build_small(size)));
    for (std::uint32_t size : {128u, 256u, 512u}) CHECK_NOTHROW(infer_shapes(build_big(size)));
  }
}
