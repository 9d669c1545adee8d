#pragma once

#include <span>
#include <string>
#include <vector>

#include "volc/models.hpp"
#include "volc/preprocess.hpp"

namespace volc {

inline constexpr double kDefaultThreshold = 0.5;

// 1 iff score >= threshold. Scores outside [0, 1] (or NaN) are kInvalidScore.
int classify(double score, double threshold = kDefaultThreshold);

struct ConfusionStats {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  // Normalized per actual class: tp + fn = 1 and tn + fp = 1.
  double tp_rate = 0.0, tn_rate = 0.0, fp_rate = 0.0, fn_rate = 0.0;
  double images_per_second = 0.0;  // filled by callers that time the run

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  double accuracy() const noexcept;
};

// Both classes must appear in `ground_truth` (kUndefinedRate otherwise).
ConfusionStats evaluate(std::span<const double> scores, std::span<const int> ground_truth,
                        double threshold = kDefaultThreshold);

// Fraction of thresholded scores equal to their label; kEmptyInput when empty.
double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = kDefaultThreshold);

struct Prediction {
  std::string id;
  double score = 0.0;
  int label = 0;
};

// One inference-mode forward pass; the composite must match the model input.
double predict(const Network<float>& model, const RgbComposite& composite);
Prediction predict_labeled(const Network<float>& model, const RgbComposite& composite,
                           double threshold = kDefaultThreshold);

// Scores for [3, H, W] images, evaluated `batch` at a time.
std::vector<double> predict_batch(const Network<float>& model, std::span<const Tensor> images,
                                  std::size_t batch = 8);

struct ThroughputResult {
  double images_per_second = 0.0;  // median over repetitions
  std::vector<double> per_repetition;
  double coefficient_of_variation = 0.0;
  bool unstable = false;  // coefficient of variation >= 0.2
  std::size_t images = 0;
  std::size_t repetitions = 0;
  std::size_t warmup = 0;
};

inline constexpr double kUnstableCv = 0.2;

// Single-worker, one image per forward pass. Each repetition times a pass
// over all images; `warmup` passes run first and are discarded.
ThroughputResult benchmark_throughput(const Network<float>& model, std::span<const Tensor> images,
                                      std::size_t repetitions, std::size_t warmup);

double median(std::vector<double> values);

// Build identifier recorded in reports (git describe at configure time).
const char* build_id() noexcept;

// JSON object with the ConfusionStats fields, model name, threshold and
// build id.
std::string evaluation_report_json(const ConfusionStats& stats, const std::string& model_name,
                                   double threshold, const std::string& split = "");

}  // namespace volc
