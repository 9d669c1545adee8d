#include "volc/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>

#include "volc/parallel.hpp"

#ifndef VOLC_BUILD_ID
#define VOLC_BUILD_ID "unknown"
#endif

namespace volc {

int classify(double score, double threshold) {
  if (!(score >= 0.0 && score <= 1.0)) {
    fail(ErrorCode::kInvalidScore, "score " + std::to_string(score) + " is outside [0, 1]");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    fail(ErrorCode::kInvalidParameter, "threshold must lie in [0, 1]");
  }
  return score >= threshold ? 1 : 0;
}

double ConfusionStats::accuracy() const noexcept {
  return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
}

namespace {

void check_pairs(std::size_t a, std::size_t b) {
  if (a != b) {
    fail(ErrorCode::kShape, "got " + std::to_string(a) + " scores for " + std::to_string(b) + " labels");
  }
  if (a == 0) fail(ErrorCode::kEmptyInput, "no samples to score");
}

int check_label(int label) {
  if (label != 0 && label != 1) fail(ErrorCode::kInvalidParameter, "labels must be 0 or 1");
  return label;
}

}  // namespace

ConfusionStats evaluate(std::span<const double> scores, std::span<const int> ground_truth, double threshold) {
  check_pairs(scores.size(), ground_truth.size());
  ConfusionStats s;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int predicted = classify(scores[i], threshold);
    if (check_label(ground_truth[i]) == 1) {
      (predicted ? s.tp : s.fn)++;
    } else {
      (predicted ? s.fp : s.tn)++;
    }
  }
  const std::size_t positives = s.tp + s.fn, negatives = s.tn + s.fp;
  if (positives == 0 || negatives == 0) {
    fail(ErrorCode::kUndefinedRate, std::string("ground truth has no ") +
                                        (positives == 0 ? "eruption" : "no-eruption") +
                                        " samples; per-class rates are undefined");
  }
  s.tp_rate = static_cast<double>(s.tp) / static_cast<double>(positives);
  s.fn_rate = static_cast<double>(s.fn) / static_cast<double>(positives);
  s.tn_rate = static_cast<double>(s.tn) / static_cast<double>(negatives);
  s.fp_rate = static_cast<double>(s.fp) / static_cast<double>(negatives);
  return s;
}

double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_pairs(scores.size(), labels.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    hits += classify(scores[i], threshold) == check_label(labels[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double predict(const Network<float>& model, const RgbComposite& composite) {
  const Tensor& px = composite.pixels;
  if (px.rank() != 3) fail(ErrorCode::kShape, "composite must be [3, H, W], got " + shape_to_string(px.shape()));
  Shape batched{1};
  batched.insert(batched.end(), px.shape().begin(), px.shape().end());
  const Tensor in(batched, std::vector<float>(px.values().begin(), px.values().end()));
  return model.infer(in)[0];
}

Prediction predict_labeled(const Network<float>& model, const RgbComposite& composite, double threshold) {
  const double score = predict(model, composite);
  return {composite.source_id, score, classify(score, threshold)};
}

std::vector<double> predict_batch(const Network<float>& model, std::span<const Tensor> images, std::size_t batch) {
  if (batch == 0) fail(ErrorCode::kInvalidParameter, "batch must be positive");
  std::vector<double> scores;
  scores.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::size_t n = std::min(batch, images.size() - start);
    const Shape& s = images[start].shape();
    if (s.size() != 3) fail(ErrorCode::kShape, "images must be [C, H, W], got " + shape_to_string(s));
    Tensor in({n, s[0], s[1], s[2]});
    const std::size_t per = images[start].size();
    for (std::size_t k = 0; k < n; ++k) {
      if (images[start + k].shape() != s) {
        fail(ErrorCode::kShape, "images in one batch must share a shape");
      }
      std::copy_n(images[start + k].data(), per, in.data() + k * per);
    }
    const Tensor out = model.infer(in);
    for (std::size_t k = 0; k < n; ++k) scores.push_back(out[k]);
  }
  return scores;
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::kEmptyInput, "median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ThroughputResult benchmark_throughput(const Network<float>& model, std::span<const Tensor> images,
                                      std::size_t repetitions, std::size_t warmup) {
  if (images.empty()) fail(ErrorCode::kEmptyInput, "benchmark needs at least one image");
  if (repetitions < 3) fail(ErrorCode::kInvalidParameter, "benchmark needs at least 3 repetitions");
  if (warmup < 1) fail(ErrorCode::kInvalidParameter, "benchmark needs at least 1 warmup pass");
  ScopedWorkers single(1);
  auto pass = [&] {
    const auto t0 = std::chrono::steady_clock::now();
    predict_batch(model, images, 1);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  for (std::size_t i = 0; i < warmup; ++i) pass();
  ThroughputResult r;
  r.images = images.size();
  r.repetitions = repetitions;
  r.warmup = warmup;
  for (std::size_t i = 0; i < repetitions; ++i) {
    r.per_repetition.push_back(static_cast<double>(images.size()) / pass());
  }
  r.images_per_second = median(r.per_repetition);
  double mean = 0.0;
  for (double v : r.per_repetition) mean += v;
  mean /= static_cast<double>(repetitions);
  double var = 0.0;
  for (double v : r.per_repetition) var += (v - mean) * (v - mean);
  var /= static_cast<double>(repetitions - 1);
  r.coefficient_of_variation = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  r.unstable = r.coefficient_of_variation >= kUnstableCv;
  return r;
}

const char* build_id() noexcept { return VOLC_BUILD_ID; }

std::string evaluation_report_json(const ConfusionStats& s, const std::string& model_name, double threshold,
                                   const std::string& split) {
  nlohmann::ordered_json j;
  j["model"] = model_name;
  if (!split.empty()) j["split"] = split;
  j["threshold"] = threshold;
  j["samples"] = s.total();
  j["tp"] = s.tp;
  j["fn"] = s.fn;
  j["tn"] = s.tn;
  j["fp"] = s.fp;
  j["tp_rate"] = s.tp_rate;
  j["fn_rate"] = s.fn_rate;
  j["tn_rate"] = s.tn_rate;
  j["fp_rate"] = s.fp_rate;
  j["accuracy"] = s.accuracy();
  j["images_per_second"] = s.images_per_second;
  j["build"] = build_id();
  return j.dump(2) + "\n";
}

}  // namespace volc
