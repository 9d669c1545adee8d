#include <doctest.h>

#include <json.hpp>

#include "reference_samples.hpp"
#include "test_util.hpp"
#include "volc/runtime.hpp"
#include "volc/synth.hpp"
#include "volc/train.hpp"

using namespace volc;
using testutil::thrown_code;

namespace {

RgbComposite synthetic_composite(const std::string& subclass, std::uint64_t seed, std::size_t size) {
  const SynthSample s = synth_sample(subclass, 64, RngStream(seed), subclass);
  return prepare_composite(s.patch, SensorProfile::synthetic(), {}, size);
}

}  // namespace

TEST_SUITE("runtime") {
  TEST_CASE("threshold classification") {
    CHECK(classify(0.88) == 1);
    CHECK(classify(0.13) == 0);
    CHECK(classify(0.5) == 1);
    CHECK(classify(0.0) == 0);
    CHECK(classify(1.0) == 1);
    CHECK(classify(0.3, 0.2) == 1);
    CHECK(thrown_code([] { classify(1.01); }) == ErrorCode::kInvalidScore);
    CHECK(thrown_code([] { classify(-0.1); }) == ErrorCode::kInvalidScore);
    CHECK(thrown_code([] { classify(std::nan("")); }) == ErrorCode::kInvalidScore);
    CHECK(thrown_code([] { classify(0.5, 2.0); }) == ErrorCode::kInvalidParameter);
  }

  TEST_CASE("classification is symmetric about one half") {
    RngStream rng(6);
    for (int i = 0; i < 10000; ++i) {
      const double s = rng.uniform();
      if (s == 0.5) continue;
      CHECK(classify(s, 0.5) == 1 - classify(1.0 - s, 0.5));
    }
  }

  TEST_CASE("confusion counts for the full-model samples") {
    const auto& t = reference::kBigModel;
    const ConfusionStats s = evaluate(reference::scores(t), reference::truths(t));
    CHECK(s.tp == 13);
    CHECK(s.fn == 1);
    CHECK(s.tn == 12);
    CHECK(s.fp == 1);
    CHECK(s.tp_rate == doctest::Approx(13.0 / 14.0));
    CHECK(s.accuracy() == doctest::Approx(25.0 / 27.0));
    CHECK(std::abs(s.tp_rate + s.fn_rate - 1.0) < 1e-9);
    CHECK(std::abs(s.tn_rate + s.fp_rate - 1.0) < 1e-9);
    CHECK(s.total() == 27);
  }

  TEST_CASE("confusion counts for the pruned-model samples") {
    // Counted by hand from the listed pairs: 13 eruptions (6 + 5 + 2 per
    // column) and 14 non-eruptions. Misses are 0.01, 0.00, 0.00; false alarms
    // are 0.99, 0.56, 0.99, 0.64.
    const auto& t = reference::kSmallModel;
    const auto truths = reference::truths(t);
    CHECK(std::count(truths.begin(), truths.end(), 1) == 13);
    const ConfusionStats s = evaluate(reference::scores(t), truths);
    CHECK(s.tp == 10);
    CHECK(s.fn == 3);
    CHECK(s.tn == 10);
    CHECK(s.fp == 4);
    CHECK(s.tp_rate == doctest::Approx(10.0 / 13.0));
    CHECK(s.tn_rate == doctest::Approx(10.0 / 14.0));
  }

  TEST_CASE("perfect predictions and undefined rates") {
    const std::vector<double> scores{0.9, 0.8, 0.1, 0.2};
    const std::vector<int> truth{1, 1, 0, 0};
    const ConfusionStats s = evaluate(scores, truth);
    CHECK(s.tp_rate == 1.0);
    CHECK(s.tn_rate == 1.0);
    CHECK(s.fp == 0);
    CHECK(s.fn == 0);
    CHECK(thrown_code([] { evaluate(std::vector<double>{0.9}, std::vector<int>{1}); }) == ErrorCode::kUndefinedRate);
    CHECK(thrown_code([] { evaluate({}, {}); }) == ErrorCode::kEmptyInput);
    CHECK(thrown_code([&] { evaluate(scores, std::vector<int>{1, 0}); }) == ErrorCode::kShape);
  }

  TEST_CASE("raising the threshold never adds false positives or removes false negatives") {
    RngStream rng(12);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> scores(40);
      std::vector<int> truth(40);
      for (std::size_t i = 0; i < 40; ++i) {
        scores[i] = rng.uniform();
        truth[i] = static_cast<int>(i % 2);
      }
      std::size_t prev_fp = 41, prev_fn = 0;
      for (int k = 0; k <= 20; ++k) {
        const ConfusionStats s = evaluate(scores, truth, k / 20.0);
        CHECK(s.fp <= prev_fp);
        CHECK(s.fn >= prev_fn);
        prev_fp = s.fp;
        prev_fn = s.fn;
      }
    }
  }

  TEST_CASE("median contract") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK(thrown_code([] { median({}); }) == ErrorCode::kEmptyInput);
  }

  TEST_CASE("benchmark contract") {
    const ModelSpec spec = build_small(32);
    RngStream rng(2);
    const Network<float> net(spec, init_weights(spec, rng));
    std::vector<Tensor> images(3, Tensor::full({3, 32, 32}, 0.4f));
    const ThroughputResult r = benchmark_throughput(net, images, 3, 1);
    REQUIRE(r.per_repetition.size() == 3);
    const auto [lo, hi] = std::minmax_element(r.per_repetition.begin(), r.per_repetition.end());
    CHECK(r.images_per_second >= *lo);
    CHECK(r.images_per_second <= *hi);
    CHECK(r.images == 3);
    CHECK(r.unstable == (r.coefficient_of_variation >= kUnstableCv));
    CHECK(thrown_code([&] { benchmark_throughput(net, {}, 3, 1); }) == ErrorCode::kEmptyInput);
    CHECK(thrown_code([&] { benchmark_throughput(net, images, 2, 1); }) == ErrorCode::kInvalidParameter);
    CHECK(thrown_code([&] { benchmark_throughput(net, images, 3, 0); }) == ErrorCode::kInvalidParameter);
  }

  TEST_CASE("prediction is deterministic and shape checked") {
    const ModelSpec spec = build_small(32);
    RngStream rng(2);
    const Network<float> net(spec, init_weights(spec, rng));
    const RgbComposite c = synthetic_composite("city", 3, 32);
    const double a = predict(net, c), b = predict(net, c);
    CHECK(a == b);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    const Prediction p = predict_labeled(net, c);
    CHECK(p.label == classify(p.score));
    CHECK(p.id == "city");
    const std::vector<Tensor> batch{c.pixels, c.pixels, c.pixels};
    for (double s : predict_batch(net, batch, 2)) CHECK(std::abs(s - a) < 1e-6);
    CHECK(thrown_code([&] { predict(net, synthetic_composite("city", 3, 64)); }) == ErrorCode::kShape);
  }

  TEST_CASE("a trained model separates eruptions from clouds") {
    LabeledImages tr, val;
    const RngStream base(40);
    for (std::size_t i = 0; i < 24; ++i) {
      const bool hot = i % 2 == 0;
      const std::string sub = hot ? "eruption" : kNegativeSubclasses[(i / 2) % kNegativeSubclasses.size()];
      const SynthSample s = synth_sample(sub, 64, base.fork("t", i), sub);
      (i < 20 ? tr : val).images.push_back(prepare_composite(s.patch, SensorProfile::synthetic(), {}, 32).pixels);
      (i < 20 ? tr : val).labels.push_back(hot);
    }
    TrainConfig c;
    c.epochs = 15;
    c.epoch_len = 64;
    c.seed = 1;
    const ModelSpec spec = build_small(32);
    const TrainResult r = train(spec, tr, val, c);
    const Network<float> net(spec, r.weights);
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
      CHECK(predict(net, synthetic_composite("eruption", seed, 32)) >= 0.9);
      CHECK(predict(net, synthetic_composite("cloudy", seed, 32)) <= 0.1);
    }
  }

  TEST_CASE("evaluation report") {
    const auto& t = reference::kBigModel;
    const ConfusionStats s = evaluate(reference::scores(t), reference::truths(t));
    const auto j = nlohmann::json::parse(evaluation_report_json(s, "big", 0.5, "test"));
    CHECK(j.at("tp") == 13);
    CHECK(j.at("model") == "big");
    CHECK(j.at("threshold") == 0.5);
    CHECK(j.at("split") == "test");
    CHECK(j.at("build").get<std::string>() == build_id());
    CHECK(std::string(build_id()).rfind("0.1.0", 0) == 0);
  }
}
