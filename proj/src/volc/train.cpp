#include "volc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "volc/parallel.hpp"
#include "volc/patch_io.hpp"
#include "volc/runtime.hpp"

namespace volc {
namespace {

using Json = nlohmann::ordered_json;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

double mean_bce(std::span<const double> scores, std::span<const int> labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], nn::kBceClamp, 1.0 - nn::kBceClamp);
    sum -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(scores.size());
}

void check_set(const LabeledImages& set, const ModelSpec& spec, const char* what) {
  if (set.images.size() != set.labels.size()) {
    fail(ErrorCode::kShape, std::string(what) + " set has " + std::to_string(set.images.size()) + " images and " +
                                std::to_string(set.labels.size()) + " labels");
  }
  if (set.images.empty()) fail(ErrorCode::kEmptyInput, std::string(what) + " split is empty");
  const Shape expected{spec.input[0], spec.input[1], spec.input[2]};
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    if (set.images[i].shape() != expected) {
      fail(ErrorCode::kShape, std::string(what) + " image " + std::to_string(i) + " is " +
                                  shape_to_string(set.images[i].shape()) + ", model expects " +
                                  shape_to_string(expected));
    }
    if (set.labels[i] != 0 && set.labels[i] != 1) {
      fail(ErrorCode::kInvalidParameter, std::string(what) + " labels must be 0 or 1");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kInvalidParameter, "epochs must be at least 1");
  if (batch_size < 2) fail(ErrorCode::kInvalidParameter, "batch_size must be at least 2 (batchnorm needs two samples)");
  if (!positive_finite(learning_rate)) fail(ErrorCode::kInvalidParameter, "learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::kInvalidParameter, "Adam betas must lie in [0, 1)");
  }
  if (!positive_finite(adam_epsilon)) fail(ErrorCode::kInvalidParameter, "adam_epsilon must be positive");
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) {
    fail(ErrorCode::kInvalidParameter, "bn_momentum must lie in (0, 1)");
  }
  if (!(std::isfinite(noise_sigma) && noise_sigma >= 0.0)) {
    fail(ErrorCode::kInvalidParameter, "noise_sigma must be non-negative");
  }
  if (epoch_len == 1) fail(ErrorCode::kInvalidParameter, "epoch_len must be 0 (automatic) or at least 2");
  if (!positive_finite(alpha)) fail(ErrorCode::kInvalidParameter, "alpha must be positive");
  if (eval_batch < 1) fail(ErrorCode::kInvalidParameter, "eval_batch must be at least 1");
}

std::string train_config_to_json(const TrainConfig& c) {
  Json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["bn_momentum"] = c.bn_momentum;
  j["noise_sigma"] = c.noise_sigma;
  j["augment"] = c.augment;
  j["seed"] = c.seed;
  j["epoch_len"] = c.epoch_len;
  j["alpha"] = c.alpha;
  j["eval_batch"] = c.eval_batch;
  return j.dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("train config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kParse, "train config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    auto count = [&](std::size_t& out) {
      if (!v.is_number_unsigned()) fail(ErrorCode::kInvalidParameter, "train config: " + key + " must be a non-negative integer");
      out = v.get<std::size_t>();
    };
    auto real = [&](double& out) {
      if (!v.is_number()) fail(ErrorCode::kInvalidParameter, "train config: " + key + " must be a number");
      out = v.get<double>();
    };
    if (key == "epochs") count(c.epochs);
    else if (key == "batch_size") count(c.batch_size);
    else if (key == "learning_rate") real(c.learning_rate);
    else if (key == "beta1") real(c.beta1);
    else if (key == "beta2") real(c.beta2);
    else if (key == "adam_epsilon") real(c.adam_epsilon);
    else if (key == "bn_momentum") real(c.bn_momentum);
    else if (key == "noise_sigma") real(c.noise_sigma);
    else if (key == "alpha") real(c.alpha);
    else if (key == "epoch_len") count(c.epoch_len);
    else if (key == "eval_batch") count(c.eval_batch);
    else if (key == "augment") {
      if (!v.is_boolean()) fail(ErrorCode::kInvalidParameter, "train config: augment must be true or false");
      c.augment = v.get<bool>();
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) fail(ErrorCode::kInvalidParameter, "train config: seed must be a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else {
      fail(ErrorCode::kInvalidParameter, "train config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::string TrainReport::to_json(bool include_timing) const {
  Json j;
  j["model"] = model;
  j["seed"] = seed;
  j["epoch_len"] = epoch_len;
  j["train_samples"] = train_samples;
  j["val_samples"] = val_samples;
  Json rows = Json::array();
  for (const EpochStats& e : epochs) {
    Json r;
    r["epoch"] = e.epoch;
    r["train_loss"] = e.train_loss;
    r["train_accuracy"] = e.train_accuracy;
    r["val_loss"] = e.val_loss;
    r["val_accuracy"] = e.val_accuracy;
    if (include_timing) r["seconds"] = e.seconds;
    rows.push_back(std::move(r));
  }
  j["epochs"] = std::move(rows);
  if (!epochs.empty()) j["final_val_accuracy"] = epochs.back().val_accuracy;
  if (include_timing) {
    double total = 0.0;
    for (const EpochStats& e : epochs) total += e.seconds;
    j["total_seconds"] = total;
  }
  return j.dump(2) + "\n";
}

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy,seconds\n";
  for (const EpochStats& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',' << e.val_loss << ','
        << e.val_accuracy << ',' << e.seconds << '\n';
  }
  return out.str();
}

LabeledImages load_split(const std::filesystem::path& root, const DatasetManifest& manifest, Split split,
                         std::size_t size, const CompositeAlpha& alpha) {
  const std::vector<std::size_t> idx = manifest.indices(split);
  LabeledImages set;
  set.images.resize(idx.size());
  set.labels.resize(idx.size());
  set.ids.resize(idx.size());
  parallel_for(idx.size(), [&](std::size_t i) {
    const ManifestEntry& e = manifest.samples[idx[i]];
    const BandPatch patch = read_patch(root / e.path);
    set.images[i] = prepare_composite(patch, SensorProfile::for_sensor(patch.sensor), alpha, size).pixels;
    set.labels[i] = e.label;
    set.ids[i] = e.path;
  });
  return set;
}

TrainResult train(const ModelSpec& spec, const LabeledImages& train_set, const LabeledImages& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  infer_shapes(spec);
  check_set(train_set, spec, "train");
  check_set(val_set, spec, "val");
  const auto positives = static_cast<std::size_t>(std::count(train_set.labels.begin(), train_set.labels.end(), 1));
  const std::size_t negatives = train_set.labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    fail(ErrorCode::kMissingClass, std::string("train split has no ") + (positives == 0 ? "eruption" : "no-eruption") +
                                       " samples");
  }

  const RngStream base(config.seed);
  RngStream init_rng = base.fork("init");
  Network<float> net(spec, init_weights(spec, init_rng));
  net.set_batchnorm_momentum(static_cast<float>(config.bn_momentum));
  RngStream dropout_rng = base.fork("dropout");
  nn::AdamState<float> adam;
  adam.learning_rate = config.learning_rate;
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.epsilon = config.adam_epsilon;

  TrainReport report;
  report.model = spec.name;
  report.seed = config.seed;
  report.epoch_len = config.epoch_len ? config.epoch_len : 2 * std::max(positives, negatives);
  report.train_samples = train_set.images.size();
  report.val_samples = val_set.images.size();

  const std::size_t per_image = train_set.images[0].size();
  const Shape& image_shape = train_set.images[0].shape();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream batch_rng = base.fork("batches", epoch);
    const BatchPlan plan = balanced_batches(train_set.labels, config.batch_size, report.epoch_len, batch_rng, epoch);

    double loss_sum = 0.0;
    std::size_t hits = 0, seen = 0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto& draws = plan.batches[b];
      const std::size_t n = draws.size();
      Tensor x({n, image_shape[0], image_shape[1], image_shape[2]});
      Tensor y({n, 1});
      // Each draw gets its own stream keyed by its position in the run, so
      // the batch can be assembled in parallel.
      parallel_for(n, [&](std::size_t k) {
        RngStream rng = base.fork("augment", seen + epoch * report.epoch_len + k);
        const Tensor& src = train_set.images[draws[k]];
        Tensor img = config.augment ? augment(src, rng) : src;
        if (config.noise_sigma > 0.0) img = add_gaussian_noise(img, config.noise_sigma, rng);
        std::copy_n(img.data(), per_image, x.data() + k * per_image);
        y[k] = static_cast<float>(train_set.labels[draws[k]]);
      });

      const Tensor out = net.forward_train(x, dropout_rng);
      const auto loss = nn::bce_loss(out, y);
      if (!std::isfinite(loss.loss)) {
        fail(ErrorCode::kDivergence, "loss became " + std::to_string(loss.loss) + " at epoch " +
                                         std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1));
      }
      net.backward(loss.grad);
      const auto params = net.trainable();
      nn::adam_step<float>(adam, params);

      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) hits += classify(out[k]) == static_cast<int>(y[k]);
      seen += n;
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(seen);
    stats.train_accuracy = static_cast<double>(hits) / static_cast<double>(seen);
    const std::vector<double> scores = predict_batch(net, val_set.images, config.eval_batch);
    stats.val_accuracy = accuracy(scores, val_set.labels);
    stats.val_loss = mean_bce(scores, val_set.labels);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return {net.weights(), std::move(report)};
}

TrainResult train(const ModelSpec& spec, const DatasetManifest& manifest, const std::filesystem::path& root,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  manifest.validate();
  if (spec.input[1] != spec.input[2]) fail(ErrorCode::kShape, "model input must be square");
  if (manifest.count(Split::kTrain, 0) == 0 || manifest.count(Split::kTrain, 1) == 0) {
    fail(ErrorCode::kMissingClass, "train split must contain both classes");
  }
  const CompositeAlpha alpha = CompositeAlpha::uniform(config.alpha);
  const LabeledImages train_set = load_split(root, manifest, Split::kTrain, spec.input[1], alpha);
  const LabeledImages val_set = load_split(root, manifest, Split::kVal, spec.input[1], alpha);
  return train(spec, train_set, val_set, config, on_epoch);
}

}  // namespace volc
