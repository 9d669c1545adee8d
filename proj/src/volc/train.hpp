#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "volc/dataset.hpp"
#include "volc/models.hpp"
#include "volc/preprocess.hpp"

namespace volc {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double bn_momentum = 0.9;  // 0.99 leaves running stats stale over short runs
  double noise_sigma = 0.02;
  bool augment = true;  // random square symmetries on training draws
  std::uint64_t seed = 0;
  std::size_t epoch_len = 0;  // 0: twice the majority-class train count
  double alpha = kDefaultAlpha;
  std::size_t eval_batch = 8;

  // epochs >= 1, batch_size >= 2, finite positive rates, betas in [0, 1),
  // bn_momentum in (0, 1).
  void validate() const;
};

std::string train_config_to_json(const TrainConfig& config);
// Missing keys keep their defaults; unknown keys are kInvalidParameter.
TrainConfig train_config_from_json(const std::string& text);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t epoch_len = 0;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
  std::vector<EpochStats> epochs;

  // Timings vary run to run; leave them out to compare reports byte for byte.
  std::string to_json(bool include_timing = true) const;
  // epoch,train_loss,train_accuracy,val_loss,val_accuracy,seconds
  std::string to_csv() const;
};

// Preprocessed [3, size, size] composites with labels, in manifest order.
struct LabeledImages {
  std::vector<Tensor> images;
  std::vector<int> labels;
  std::vector<std::string> ids;
};

LabeledImages load_split(const std::filesystem::path& root, const DatasetManifest& manifest, Split split,
                         std::size_t size, const CompositeAlpha& alpha = {});

struct TrainResult {
  ModelWeights weights;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train(const ModelSpec& spec, const LabeledImages& train_set, const LabeledImages& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Loads the train and val splits of `manifest` (paths relative to `root`)
// at the model's input size, then trains.
TrainResult train(const ModelSpec& spec, const DatasetManifest& manifest, const std::filesystem::path& root,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace volc
