#include "volc/volc.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <json.hpp>
#include <memory>
#include <new>
#include <string>

#include "volc/bytes.hpp"
#include "volc/dataset.hpp"
#include "volc/model_io.hpp"
#include "volc/parallel.hpp"
#include "volc/patch_io.hpp"
#include "volc/runtime.hpp"
#include "volc/synth.hpp"
#include "volc/train.hpp"

struct volc_model {
  volc::Model model;
  std::unique_ptr<volc::Network<float>> net;

  explicit volc_model(volc::Model m)
      : model(std::move(m)), net(std::make_unique<volc::Network<float>>(model.spec, model.weights)) {}
};

namespace {

using Json = nlohmann::ordered_json;

thread_local std::string t_last_error;

volc_status to_status(volc::ErrorCode code) {
  // ErrorCode and volc_status list the same failures in the same order.
  return static_cast<volc_status>(static_cast<int>(code) + 1);
}

template <typename F>
volc_status guarded(F&& body) {
  try {
    t_last_error.clear();
    body();
    return VOLC_OK;
  } catch (const volc::Error& e) {
    t_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return VOLC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return VOLC_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) volc::fail(volc::ErrorCode::kInvalidParameter, std::string(name) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

Json split_counts(const volc::DatasetManifest& m) {
  Json j;
  j["samples"] = m.samples.size();
  for (volc::Split s : {volc::Split::kTrain, volc::Split::kVal, volc::Split::kTest}) {
    j[volc::split_name(s)] = {{"eruption", m.count(s, 1)}, {"no_eruption", m.count(s, 0)}};
  }
  return j;
}

volc::RgbComposite load_composite(const std::filesystem::path& path, std::size_t size, double alpha) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    const volc::BandPatch patch = volc::read_patch(path);
    return volc::prepare_composite(patch, volc::SensorProfile::for_sensor(patch.sensor),
                                   volc::CompositeAlpha::uniform(alpha), size);
  }
  volc::RgbComposite c = volc::read_composite(path);
  if (c.pixels.dim(1) != size || c.pixels.dim(2) != size) {
    c.pixels = volc::bicubic_resize(c.pixels, size, size);
  }
  return c;
}

}  // namespace

extern "C" {

const char* volc_status_name(volc_status status) {
  if (status == VOLC_OK) return "ok";
  const int code = static_cast<int>(status) - 1;
  if (code < 0 || code > static_cast<int>(volc::ErrorCode::kInternal)) return "unknown";
  return volc::error_code_name(static_cast<volc::ErrorCode>(code));
}

const char* volc_last_error(void) { return t_last_error.c_str(); }
const char* volc_version(void) { return "0.1.0"; }
const char* volc_build_id(void) { return volc::build_id(); }
void volc_free_string(char* s) { std::free(s); }
void volc_set_workers(int workers) { volc::set_default_worker_count(workers > 0 ? workers : 0); }

volc_status volc_synth(size_t n_per_class, uint64_t seed, size_t patch_size, const char* out_dir,
                       char** summary_json) {
  return guarded([&] {
    require(out_dir, "out_dir");
    volc::SynthOptions opts;
    opts.size = patch_size;
    const auto manifest = volc::synth_generate(n_per_class, seed, out_dir, opts);
    Json j = split_counts(manifest);
    j["manifest"] = (std::filesystem::path(out_dir) / volc::kManifestFileName).string();
    emit(summary_json, j.dump(2) + "\n");
  });
}

volc_status volc_ingest(const char* root, const char* catalog_csv, uint64_t seed, double radius_km,
                        double window_days, char** summary_json) {
  return guarded([&] {
    require(root, "root");
    if (!(std::isfinite(radius_km) && radius_km >= 0.0)) {
      volc::fail(volc::ErrorCode::kInvalidParameter, "radius_km must be non-negative");
    }
    if (!(std::isfinite(window_days) && window_days >= 0.0 && window_days == std::floor(window_days))) {
      volc::fail(volc::ErrorCode::kInvalidParameter, "window_days must be a non-negative whole number");
    }
    volc::CatalogParse catalog;
    if (catalog_csv) catalog = volc::parse_catalog(volc::read_text(catalog_csv));
    volc::IngestOptions opts;
    opts.radius_km = radius_km;
    opts.window_days = static_cast<long>(window_days);
    const auto result = volc::ingest_catalog(root, catalog.records, {}, seed, opts);
    volc::save_manifest(std::filesystem::path(root) / volc::kManifestFileName, result.manifest);
    Json j = split_counts(result.manifest);
    j["labelled_from_meta"] = result.labelled_from_meta;
    j["labelled_from_catalog"] = result.labelled_from_catalog;
    j["catalog_records"] = catalog.records.size();
    Json errors = Json::array();
    for (const auto& e : catalog.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    j["catalog_errors"] = std::move(errors);
    emit(summary_json, j.dump(2) + "\n");
  });
}

volc_status volc_preprocess(const char* root, size_t size, double alpha, char** summary_json) {
  return guarded([&] {
    require(root, "root");
    namespace fs = std::filesystem;
    const fs::path base(root);
    std::vector<std::string> dirs;
    if (fs::exists(base / volc::kBandFileName)) {
      dirs.emplace_back(".");
    } else {
      dirs = volc::find_patch_dirs(base);
    }
    if (dirs.empty()) volc::fail(volc::ErrorCode::kEmptyInput, "no band files under " + base.string());
    const auto weights = volc::CompositeAlpha::uniform(alpha);
    volc::parallel_for(dirs.size(), [&](std::size_t i) {
      const fs::path dir = base / dirs[i];
      const volc::BandPatch patch = volc::read_patch(dir);
      const auto composite =
          volc::prepare_composite(patch, volc::SensorProfile::for_sensor(patch.sensor), weights, size);
      volc::write_composite(dir / volc::kCompositeFileName, composite, patch.sensor);
    });
    Json j;
    j["composites"] = dirs.size();
    j["size"] = size;
    j["alpha"] = alpha;
    emit(summary_json, j.dump(2) + "\n");
  });
}

volc_status volc_model_create(const char* name, uint32_t input_size, uint64_t seed, volc_model** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    volc::Model m;
    m.spec = volc::build_named(name, input_size);
    volc::RngStream rng = volc::RngStream(seed).fork("init");
    m.weights = volc::init_weights(m.spec, rng);
    *out = new volc_model(std::move(m));
  });
}

volc_status volc_model_load(const char* path, volc_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto model = std::make_unique<volc_model>(volc::load_model(path));
    *out = model.release();
  });
}

volc_status volc_model_save(const volc_model* model, const char* path, size_t* bytes_written) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    const std::size_t n = volc::save_model(model->model.spec, model->model.weights, path);
    if (bytes_written) *bytes_written = n;
  });
}

void volc_model_free(volc_model* model) { delete model; }

volc_status volc_model_describe(const volc_model* model, char** json) {
  return guarded([&] {
    require(model, "model");
    require(json, "json");
    const auto& spec = model->model.spec;
    Json j;
    j["name"] = spec.name;
    j["input"] = spec.input;
    Json layers = Json::array();
    for (const auto& c : volc::layer_costs(spec)) {
      layers.push_back({{"index", c.index},
                        {"kind", volc::layer_kind_name(c.kind)},
                        {"output", c.output},
                        {"params", c.params},
                        {"macs", c.macs}});
    }
    j["layers"] = std::move(layers);
    j["params"] = volc::param_count(spec);
    j["macs"] = volc::flop_count(spec);
    j["spatial_trace"] = volc::spatial_trace(spec);
    emit(json, j.dump(2) + "\n");
  });
}

volc_status volc_model_param_count(const volc_model* model, uint64_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = volc::param_count(model->model.spec);
  });
}

volc_status volc_model_flop_count(const volc_model* model, uint64_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = volc::flop_count(model->model.spec);
  });
}

volc_status volc_model_input_size(const volc_model* model, uint32_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model.spec.input[1];
  });
}

volc_status volc_train(const char* name, uint32_t input_size, const char* data_root, const char* config_json,
                       volc_epoch_fn on_epoch, void* user, volc_model** out, char** report_json,
                       char** curves_csv) {
  return guarded([&] {
    require(name, "name");
    require(data_root, "data_root");
    require(out, "out");
    const volc::TrainConfig config = volc::train_config_from_json(config_json ? config_json : "{}");
    const volc::ModelSpec spec = volc::build_named(name, input_size);
    const std::filesystem::path root(data_root);
    const auto manifest = volc::load_manifest(root / volc::kManifestFileName);
    volc::EpochCallback cb;
    if (on_epoch) {
      cb = [&](const volc::EpochStats& s) {
        on_epoch(s.epoch, s.train_loss, s.train_accuracy, s.val_accuracy, s.seconds, user);
      };
    }
    auto result = volc::train(spec, manifest, root, config, cb);
    auto model = std::make_unique<volc_model>(volc::Model{spec, std::move(result.weights)});
    std::string report = result.report.to_json();
    std::string curves = result.report.to_csv();
    char* report_c = report_json ? dup_string(report) : nullptr;
    char* curves_c = nullptr;
    try {
      if (curves_csv) curves_c = dup_string(curves);
    } catch (...) {
      std::free(report_c);
      throw;
    }
    if (report_json) *report_json = report_c;
    if (curves_csv) *curves_csv = curves_c;
    *out = model.release();
  });
}

volc_status volc_classify(double score, double threshold, int* label) {
  return guarded([&] {
    require(label, "label");
    *label = volc::classify(score, threshold);
  });
}

volc_status volc_predict_pixels(const volc_model* model, const float* pixels, size_t channels, size_t height,
                                size_t width, double* score) {
  return guarded([&] {
    require(model, "model");
    require(pixels, "pixels");
    require(score, "score");
    const std::size_t n = channels * height * width;
    const volc::Tensor in({1, channels, height, width}, std::vector<float>(pixels, pixels + n));
    *score = model->net->infer(in)[0];
  });
}

volc_status volc_predict_path(const volc_model* model, const char* path, double alpha, double* score) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    require(score, "score");
    const auto composite = load_composite(path, model->model.spec.input[1], alpha);
    *score = volc::predict(*model->net, composite);
  });
}

volc_status volc_evaluate(const volc_model* model, const char* data_root, const char* split, double threshold,
                          double alpha, char** report_json) {
  return guarded([&] {
    require(model, "model");
    require(data_root, "data_root");
    require(split, "split");
    require(report_json, "report_json");
    const std::filesystem::path root(data_root);
    const auto manifest = volc::load_manifest(root / volc::kManifestFileName);
    const auto set = volc::load_split(root, manifest, volc::parse_split(split), model->model.spec.input[1],
                                      volc::CompositeAlpha::uniform(alpha));
    if (set.images.empty()) volc::fail(volc::ErrorCode::kEmptyInput, std::string("split '") + split + "' is empty");
    const auto t0 = std::chrono::steady_clock::now();
    const auto scores = volc::predict_batch(*model->net, set.images);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto stats = volc::evaluate(scores, set.labels, threshold);
    stats.images_per_second = seconds > 0.0 ? static_cast<double>(scores.size()) / seconds : 0.0;
    Json j = Json::parse(volc::evaluation_report_json(stats, model->model.spec.name, threshold, split));
    Json preds = Json::array();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      preds.push_back({{"id", set.ids[i]},
                       {"label", set.labels[i]},
                       {"score", scores[i]},
                       {"predicted", volc::classify(scores[i], threshold)}});
    }
    j["predictions"] = std::move(preds);
    emit(report_json, j.dump(2) + "\n");
  });
}

volc_status volc_confusion(const double* scores, const int* labels, size_t n, double threshold, size_t* tp,
                           size_t* fn, size_t* tn, size_t* fp) {
  return guarded([&] {
    if (n > 0) {
      require(scores, "scores");
      require(labels, "labels");
    }
    const auto s = volc::evaluate({scores, n}, {labels, n}, threshold);
    if (tp) *tp = s.tp;
    if (fn) *fn = s.fn;
    if (tn) *tn = s.tn;
    if (fp) *fp = s.fp;
  });
}

volc_status volc_benchmark(const volc_model* model, size_t images, size_t repetitions, size_t warmup,
                           uint64_t seed, char** report_json) {
  return guarded([&] {
    require(model, "model");
    require(report_json, "report_json");
    const auto& in = model->model.spec.input;
    std::vector<volc::Tensor> batch;
    volc::RngStream base(seed);
    for (std::size_t i = 0; i < images; ++i) {
      volc::RngStream rng = base.fork("bench", i);
      volc::Tensor t({in[0], in[1], in[2]});
      for (float& v : t.values()) v = static_cast<float>(rng.uniform());
      batch.push_back(std::move(t));
    }
    const auto r = volc::benchmark_throughput(*model->net, batch, repetitions, warmup);
    Json j;
    j["model"] = model->model.spec.name;
    j["input"] = in;
    j["images"] = r.images;
    j["repetitions"] = r.repetitions;
    j["warmup"] = r.warmup;
    j["images_per_second"] = r.images_per_second;
    j["per_repetition"] = r.per_repetition;
    j["coefficient_of_variation"] = r.coefficient_of_variation;
    j["unstable"] = r.unstable;
    j["macs"] = volc::flop_count(model->model.spec);
    j["build"] = volc::build_id();
    emit(report_json, j.dump(2) + "\n");
  });
}

}  // extern "C"
