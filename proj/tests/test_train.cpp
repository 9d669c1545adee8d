#include <doctest.h>

#include <cstring>

#include "reference_samples.hpp"
#include "test_util.hpp"
#include "volc/runtime.hpp"
#include "volc/synth.hpp"
#include "volc/train.hpp"

using namespace volc;
using testutil::thrown_code;

namespace {

// In-memory synthetic set: n eruptions and n negatives (cycling subclasses)
// as [3, size, size] composites.
LabeledImages synthetic_set(std::size_t n, std::size_t size, std::uint64_t seed) {
  LabeledImages set;
  const RngStream base(seed);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const bool hot = i % 2 == 0;
    const std::string sub = hot ? "eruption" : kNegativeSubclasses[(i / 2) % kNegativeSubclasses.size()];
    const SynthSample s = synth_sample(sub, 64, base.fork("sample", i), "s" + std::to_string(i));
    set.images.push_back(prepare_composite(s.patch, SensorProfile::synthetic(), {}, size).pixels);
    set.labels.push_back(hot ? 1 : 0);
    set.ids.push_back(s.meta.id);
  }
  return set;
}

TrainConfig quick_config(std::uint64_t seed, std::size_t epochs = 2) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 8;
  c.epoch_len = 32;
  c.seed = seed;
  return c;
}

bool bit_equal(const ModelWeights& a, const ModelWeights& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].shape() != b.tensors[i].shape()) return false;
    if (std::memcmp(a.tensors[i].data(), b.tensors[i].data(), a.tensors[i].size() * sizeof(float)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("config invariants") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.epochs = 0;
    CHECK(thrown_code([&] { c.validate(); }) == ErrorCode::kInvalidParameter);
    c = {};
    c.batch_size = 1;
    CHECK(thrown_code([&] { c.validate(); }) == ErrorCode::kInvalidParameter);
    c = {};
    c.beta1 = 1.0;
    CHECK(thrown_code([&] { c.validate(); }) == ErrorCode::kInvalidParameter);
    c = {};
    c.learning_rate = -1.0;
    CHECK(thrown_code([&] { c.validate(); }) == ErrorCode::kInvalidParameter);
    CHECK(c.epochs == 100);
    CHECK(c.batch_size == 16);
  }

  TEST_CASE("config json round trip rejects unknown keys") {
    TrainConfig c = quick_config(9, 7);
    c.augment = false;
    c.noise_sigma = 0.0;
    const TrainConfig back = train_config_from_json(train_config_to_json(c));
    CHECK(train_config_to_json(back) == train_config_to_json(c));
    CHECK(back.epochs == 7);
    CHECK_FALSE(back.augment);
    CHECK(train_config_from_json("{}").epochs == 100);
    CHECK(thrown_code([] { train_config_from_json("{\"epoch\": 3}"); }) == ErrorCode::kInvalidParameter);
    CHECK(thrown_code([] { train_config_from_json("{\"epochs\": 0}"); }) == ErrorCode::kInvalidParameter);
    CHECK(thrown_code([] { train_config_from_json("{"); }) == ErrorCode::kParse);
  }

  TEST_CASE("accuracy examples") {
    CHECK(accuracy(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
    CHECK(accuracy(std::vector<double>{0.9, 0.9}, std::vector<int>{1, 0}) == 0.5);
    const auto& big = reference::kBigModel;
    CHECK(accuracy(reference::scores(big), reference::truths(big)) == doctest::Approx(25.0 / 27.0));
    CHECK(thrown_code([] { accuracy({}, {}); }) == ErrorCode::kEmptyInput);
    CHECK(thrown_code([] { accuracy(std::vector<double>{0.3}, std::vector<int>{1, 0}); }) == ErrorCode::kShape);
  }

  TEST_CASE("same seed and config give identical weights and report") {
    const LabeledImages tr = synthetic_set(6, 32, 1), val = synthetic_set(2, 32, 2);
    const ModelSpec spec = build_small(32);
    const TrainResult a = train(spec, tr, val, quick_config(3));
    const TrainResult b = train(spec, tr, val, quick_config(3));
    CHECK(bit_equal(a.weights, b.weights));
    CHECK(a.report.to_json(false) == b.report.to_json(false));
    REQUIRE(a.report.epochs.size() == 2);
    for (const auto& e : a.report.epochs) {
      CHECK(e.train_accuracy >= 0.0);
      CHECK(e.train_accuracy <= 1.0);
      CHECK(e.val_accuracy >= 0.0);
      CHECK(e.val_accuracy <= 1.0);
    }
    CHECK(a.report.epochs[1].epoch == 2);
  }

  TEST_CASE("augmentation changes results and stays reproducible") {
    const LabeledImages tr = synthetic_set(6, 32, 1), val = synthetic_set(2, 32, 2);
    const ModelSpec spec = build_small(32);
    TrainConfig off = quick_config(5);
    off.augment = false;
    const TrainResult on1 = train(spec, tr, val, quick_config(5));
    const TrainResult on2 = train(spec, tr, val, quick_config(5));
    const TrainResult off1 = train(spec, tr, val, off);
    CHECK(bit_equal(on1.weights, on2.weights));
    CHECK_FALSE(bit_equal(on1.weights, off1.weights));
  }

  TEST_CASE("an epoch draws exactly epoch_len samples") {
    for (const auto& [pos, neg] : {std::pair<std::size_t, std::size_t>{1, 99}, {50, 50}, {260, 1500}}) {
      std::vector<int> labels(pos, 1);
      labels.resize(pos + neg, 0);
      for (std::size_t len : {2u, 17u, 100u, 3001u}) {
        RngStream rng(len);
        CHECK(balanced_batches(labels, 16, len, rng).draws() == len);
      }
    }
    const LabeledImages tr = synthetic_set(3, 32, 4), val = synthetic_set(1, 32, 5);
    TrainConfig c = quick_config(1, 1);
    c.epoch_len = 0;
    // Default: twice the majority count.
    CHECK(train(build_small(32), tr, val, c).report.epoch_len == 6);
  }

  TEST_CASE("smoothed training loss decreases for most seeds") {
    // Means over consecutive 5-epoch blocks of the training loss must not rise.
    const LabeledImages tr = synthetic_set(8, 32, 11), val = synthetic_set(2, 32, 12);
    const ModelSpec spec = build_small(32);
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      TrainConfig c = quick_config(seed, 15);
      c.batch_size = 16;
      c.epoch_len = 64;
      const TrainResult r = train(spec, tr, val, c);
      std::vector<double> blocks;
      for (std::size_t e = 0; e + 5 <= r.report.epochs.size(); e += 5) {
        double s = 0.0;
        for (std::size_t k = e; k < e + 5; ++k) s += r.report.epochs[k].train_loss;
        blocks.push_back(s / 5.0);
      }
      bool monotone = true;
      for (std::size_t i = 1; i < blocks.size(); ++i) monotone = monotone && blocks[i] <= blocks[i - 1];
      good += monotone;
    }
    CHECK(good >= 9);
  }

  TEST_CASE("training errors") {
    LabeledImages tr = synthetic_set(3, 32, 4), val = synthetic_set(1, 32, 5);
    LabeledImages one_class = tr;
    std::fill(one_class.labels.begin(), one_class.labels.end(), 0);
    CHECK(thrown_code([&] { train(build_small(32), one_class, val, quick_config(1, 1)); }) == ErrorCode::kMissingClass);
    TrainConfig blow_up = quick_config(1, 3);
    blow_up.learning_rate = 1e30;
    const std::string message = testutil::thrown_message([&] { train(build_small(32), tr, val, blow_up); });
    CHECK(thrown_code([&] { train(build_small(32), tr, val, blow_up); }) == ErrorCode::kDivergence);
    CHECK(message.find("epoch") != std::string::npos);
    CHECK(message.find("batch") != std::string::npos);
    CHECK(thrown_code([&] { train(build_small(64), tr, val, quick_config(1, 1)); }) == ErrorCode::kShape);
  }

  TEST_CASE("report serializations") {
    TrainReport r;
    r.model = "small";
    r.epochs.push_back({1, 0.5, 0.75, 0.6, 0.5, 1.25});
    const std::string csv = r.to_csv();
    CHECK(csv.rfind("epoch,train_loss,train_accuracy,val_loss,val_accuracy,seconds\n", 0) == 0);
    CHECK(r.to_json(false).find("seconds") == std::string::npos);
    CHECK(r.to_json(true).find("seconds") != std::string::npos);
  }
}
