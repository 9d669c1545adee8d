// Command-line front end. Talks to the library only through volc.h.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "volc/volc.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct DomainError {
  volc_status status;
  std::string message;
};

void check(volc_status s) {
  if (s != VOLC_OK) throw DomainError{s, volc_last_error()};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { volc_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

struct ModelHandle {
  volc_model* p = nullptr;
  ~ModelHandle() { volc_model_free(p); }
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DomainError{VOLC_ERR_IO, "cannot write " + path.string()};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError{VOLC_ERR_IO, "cannot read " + path.string()};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t default_seed() {
  const char* env = std::getenv("VOLC_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno || *end || env[0] == '-') throw CLI::ValidationError("VOLC_SEED", "must be a non-negative integer");
  return v;
}

// Timestamped directory under ./runs unless --out names one.
fs::path run_dir(const std::string& out, const std::string& sub) {
  if (!out.empty()) return out;
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  fs::path base = fs::path("runs") / (sub + "-" + stamp);
  fs::path dir = base;
  for (int i = 1; fs::exists(dir); ++i) dir = base.string() + "-" + std::to_string(i);
  return dir;
}

// Every option of the subcommand with its final value, plus an argv that
// replays the run.
void log_config(const fs::path& dir, const CLI::App& sub, const CLI::App& root) {
  Json options;
  std::vector<std::string> argv{"volc"};
  for (const CLI::App* app : {&root, &sub}) {
    if (app == &sub) argv.push_back(sub.get_name());
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
      const std::string name = opt->get_name(false, true).substr(2);
      const auto results = opt->reduced_results();
      if (opt->get_type_size() == 0) {
        const bool on = opt->count() > 0;
        options[name] = on;
        if (on) argv.push_back("--" + name);
        continue;
      }
      std::vector<std::string> values = results;
      if (values.empty() && !opt->get_default_str().empty()) values.push_back(opt->get_default_str());
      if (values.empty()) continue;
      if (opt->get_items_expected_max() > 1) {
        options[name] = values;
      } else {
        options[name] = values.front();
      }
      if (opt->get_positional()) continue;
      for (const auto& v : values) {
        argv.push_back("--" + name);
        argv.push_back(v);
      }
    }
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_positional()) {
        for (const auto& v : opt->reduced_results()) argv.push_back(v);
      }
    }
  }
  Json j;
  j["subcommand"] = sub.get_name();
  j["options"] = std::move(options);
  j["argv"] = std::move(argv);
  j["build"] = volc_build_id();
  write_file(dir / "config.json", j.dump(2) + "\n");
}

void print_layer_table(const Json& j) {
  std::printf("model %s, input %s\n", j["name"].get<std::string>().c_str(), j["input"].dump().c_str());
  std::printf("%-4s %-14s %-20s %12s %16s\n", "#", "layer", "output", "params", "macs");
  for (const auto& l : j["layers"]) {
    std::printf("%-4zu %-14s %-20s %12llu %16llu\n", l["index"].get<std::size_t>(),
                l["kind"].get<std::string>().c_str(), l["output"].dump().c_str(),
                static_cast<unsigned long long>(l["params"].get<std::uint64_t>()),
                static_cast<unsigned long long>(l["macs"].get<std::uint64_t>()));
  }
  std::printf("total params %llu, macs %llu\n", static_cast<unsigned long long>(j["params"].get<std::uint64_t>()),
              static_cast<unsigned long long>(j["macs"].get<std::uint64_t>()));
}

void on_epoch(size_t epoch, double loss, double train_acc, double val_acc, double seconds, void* user) {
  const auto total = *static_cast<const std::size_t*>(user);
  std::fprintf(stderr, "epoch %zu/%zu  loss %.4f  train_acc %.4f  val_acc %.4f  (%.1f s)\n", epoch, total, loss,
               train_acc, val_acc, seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volcanic eruption detection pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads for data-parallel kernels (0: all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  std::uint64_t seed = 0;
  try {
    seed = default_seed();
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: VOLC_SEED must be a non-negative integer\n");
    return kExitUsage;
  }
  std::string out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed (default: $VOLC_SEED or 0)")->capture_default_str();
    sub->add_option("--out", out, "Run directory (default: runs/<subcommand>-<timestamp>)");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled dataset");
  std::size_t synth_n = 0, synth_size = 128;
  synth->add_option("--n", synth_n, "Samples per class")->required()->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_size, "Patch side in pixels")->capture_default_str();
  add_common(synth);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Label patches against an eruption catalog and write a manifest");
  std::string ingest_data, catalog;
  double radius_km = 50.0, window_days = 90.0;
  ingest->add_option("--data", ingest_data, "Dataset root holding patch directories")->required();
  ingest->add_option("--catalog", catalog, "Eruption catalog CSV")->check(CLI::ExistingFile);
  ingest->add_option("--radius-km", radius_km, "Match radius around catalog eruptions")->capture_default_str();
  ingest->add_option("--window-days", window_days, "Days after an eruption start that still match")
      ->capture_default_str();
  add_common(ingest);

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Write RGB composites next to every band file");
  std::string prep_data;
  std::size_t prep_size = 512;
  double alpha = 2.5;
  prep->add_option("--data", prep_data, "Dataset root or single patch directory")->required();
  prep->add_option("--size", prep_size, "Composite side in pixels")->capture_default_str();
  prep->add_option("--alpha", alpha, "Visible band weight")->capture_default_str();
  add_common(prep);

  // train
  auto* train = app.add_subcommand("train", "Train a model on a dataset");
  std::string arch, train_data, train_config;
  std::size_t epochs = 100, batch_size = 16, epoch_len = 0;
  std::uint32_t input_size = 512;
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, noise_sigma = 0.02, bn_momentum = 0.9;
  bool no_augment = false;
  train->add_option("--model", arch, "Architecture")->required()->check(CLI::IsMember({"big", "small"}));
  train->add_option("--data", train_data, "Dataset root with manifest.jsonl")->required();
  train->add_option("--input-size", input_size, "Composite side fed to the model")->capture_default_str();
  auto* cfg_opt = train->add_option("--train-config", train_config, "JSON file of training settings")
                      ->check(CLI::ExistingFile);
  std::vector<CLI::Option*> overrides{
      train->add_option("--epochs", epochs, "Training epochs")->capture_default_str(),
      train->add_option("--batch-size", batch_size, "Samples per batch")->capture_default_str(),
      train->add_option("--epoch-len", epoch_len, "Draws per epoch (0: twice the majority class)")
          ->capture_default_str(),
      train->add_option("--lr", lr, "Adam learning rate")->capture_default_str(),
      train->add_option("--beta1", beta1, "Adam beta1")->capture_default_str(),
      train->add_option("--beta2", beta2, "Adam beta2")->capture_default_str(),
      train->add_option("--bn-momentum", bn_momentum, "Batchnorm running-statistics momentum")
          ->capture_default_str(),
      train->add_option("--noise-sigma", noise_sigma, "Gaussian noise added to training draws")
          ->capture_default_str(),
      train->add_flag("--no-augment", no_augment, "Disable flips and quarter turns"),
      train->add_option("--alpha", alpha, "Visible band weight")->capture_default_str(),
  };
  for (auto* o : overrides) cfg_opt->excludes(o);
  add_common(train);

  // eval
  auto* eval = app.add_subcommand("eval", "Confusion statistics of a model on one split");
  std::string model_path, eval_data, split = "test";
  double threshold = 0.5;
  eval->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Dataset root with manifest.jsonl")->required();
  eval->add_option("--split", split, "Split to score")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--threshold", threshold, "Decision threshold")->capture_default_str();
  eval->add_option("--alpha", alpha, "Visible band weight")->capture_default_str();
  add_common(eval);

  // bench
  auto* bench = app.add_subcommand("bench", "Single-thread inference throughput");
  std::vector<std::string> bench_models, bench_archs;
  std::size_t images = 4, repetitions = 3, warmup = 1;
  auto* bm = bench->add_option("--model", bench_models, "Model file(s)")->check(CLI::ExistingFile);
  auto* ba = bench->add_option("--arch", bench_archs, "Untrained architecture(s): big, small")
                 ->check(CLI::IsMember({"big", "small"}));
  bm->excludes(ba);
  bench->add_option("--input-size", input_size, "Input side for --arch")->capture_default_str();
  bench->add_option("--images", images, "Images per repetition")->capture_default_str();
  bench->add_option("--repetitions", repetitions, "Timed repetitions")->capture_default_str();
  bench->add_option("--warmup", warmup, "Untimed warmup passes")->capture_default_str();
  add_common(bench);

  // predict
  auto* predict = app.add_subcommand("predict", "Score composites (.vrc) or patch directories");
  std::vector<std::string> inputs;
  predict->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("inputs", inputs, "Composite files or patch directories")->required();
  predict->add_option("--threshold", threshold, "Decision threshold")->capture_default_str();
  predict->add_option("--alpha", alpha, "Visible band weight")->capture_default_str();
  add_common(predict);

  // inspect-model
  auto* inspect = app.add_subcommand("inspect-model", "Print the layer table of a model");
  std::string inspect_arch;
  bool as_json = false;
  auto* im = inspect->add_option("--model", model_path, "Model file")->check(CLI::ExistingFile);
  auto* ia = inspect->add_option("--arch", inspect_arch, "Architecture: big, small")
                 ->check(CLI::IsMember({"big", "small"}));
  im->excludes(ia);
  inspect->add_option("--input-size", input_size, "Input side for --arch")->capture_default_str();
  inspect->add_flag("--json", as_json, "Print JSON instead of a table");
  inspect->add_option("--out", out, "Also write model.json and config.json here");

  try {
    app.parse(argc, argv);
    if (bench->parsed() && bm->count() == 0 && ba->count() == 0) {
      throw CLI::RequiredError("--model or --arch");
    }
    if (inspect->parsed() && im->count() == 0 && ia->count() == 0) {
      throw CLI::RequiredError("--model or --arch");
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return kExitUsage;
  }

  volc_set_workers(threads);
  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    if (name == "inspect-model") {
      ModelHandle model;
      if (!model_path.empty()) {
        check(volc_model_load(model_path.c_str(), &model.p));
      } else {
        check(volc_model_create(inspect_arch.c_str(), input_size, 0, &model.p));
      }
      OwnedString desc;
      check(volc_model_describe(model.p, &desc.p));
      const Json j = Json::parse(desc.str());
      if (as_json) {
        std::fputs(desc.str().c_str(), stdout);
      } else {
        print_layer_table(j);
      }
      if (!out.empty()) {
        write_file(fs::path(out) / "model.json", desc.str());
        log_config(out, *sub, app);
      }
      return 0;
    }

    const fs::path dir = run_dir(out, name);
    fs::create_directories(dir);
    log_config(dir, *sub, app);

    if (name == "synth") {
      OwnedString summary;
      check(volc_synth(synth_n, seed, synth_size, dir.string().c_str(), &summary.p));
      write_file(dir / "synth.json", summary.str());
      std::fputs(summary.str().c_str(), stdout);
    } else if (name == "ingest") {
      OwnedString summary;
      check(volc_ingest(ingest_data.c_str(), catalog.empty() ? nullptr : catalog.c_str(), seed, radius_km,
                        window_days, &summary.p));
      write_file(dir / "ingest.json", summary.str());
      std::fputs(summary.str().c_str(), stdout);
    } else if (name == "preprocess") {
      OwnedString summary;
      check(volc_preprocess(prep_data.c_str(), prep_size, alpha, &summary.p));
      write_file(dir / "preprocess.json", summary.str());
      std::fputs(summary.str().c_str(), stdout);
    } else if (name == "train") {
      Json cfg;
      if (!train_config.empty()) {
        try {
          cfg = Json::parse(read_file(train_config));
        } catch (const nlohmann::json::parse_error& e) {
          throw DomainError{VOLC_ERR_PARSE, train_config + ": " + e.what()};
        }
        if (!cfg.is_object()) throw DomainError{VOLC_ERR_PARSE, train_config + ": expected a JSON object"};
      } else {
        cfg["epochs"] = epochs;
        cfg["batch_size"] = batch_size;
        cfg["epoch_len"] = epoch_len;
        cfg["learning_rate"] = lr;
        cfg["beta1"] = beta1;
        cfg["beta2"] = beta2;
        cfg["bn_momentum"] = bn_momentum;
        cfg["noise_sigma"] = noise_sigma;
        cfg["augment"] = !no_augment;
        cfg["alpha"] = alpha;
      }
      if (!cfg.contains("seed")) cfg["seed"] = seed;
      write_file(dir / "train_config.json", cfg.dump(2) + "\n");
      std::size_t total = cfg.value("epochs", std::size_t{100});
      ModelHandle model;
      OwnedString report, curves;
      check(volc_train(arch.c_str(), input_size, train_data.c_str(), cfg.dump().c_str(), on_epoch, &total, &model.p,
                       &report.p, &curves.p));
      const fs::path model_file = dir / (arch + ".volcm");
      std::size_t bytes = 0;
      check(volc_model_save(model.p, model_file.string().c_str(), &bytes));
      write_file(dir / "report.json", report.str());
      write_file(dir / "curves.csv", curves.str());
      const Json r = Json::parse(report.str());
      std::printf("model %s (%zu bytes)\nfinal val_accuracy %.4f\nreport %s\n", model_file.string().c_str(), bytes,
                  r.value("final_val_accuracy", 0.0), (dir / "report.json").string().c_str());
    } else if (name == "eval") {
      ModelHandle model;
      check(volc_model_load(model_path.c_str(), &model.p));
      OwnedString report;
      check(volc_evaluate(model.p, eval_data.c_str(), split.c_str(), threshold, alpha, &report.p));
      write_file(dir / "eval.json", report.str());
      Json j = Json::parse(report.str());
      j.erase("predictions");
      std::fputs((j.dump(2) + "\n").c_str(), stdout);
    } else if (name == "bench") {
      Json results = Json::array();
      std::vector<std::string> sources = bench_models.empty() ? bench_archs : bench_models;
      for (const auto& src : sources) {
        ModelHandle model;
        if (bench_models.empty()) {
          check(volc_model_create(src.c_str(), input_size, seed, &model.p));
        } else {
          check(volc_model_load(src.c_str(), &model.p));
        }
        OwnedString report;
        check(volc_benchmark(model.p, images, repetitions, warmup, seed, &report.p));
        Json r = Json::parse(report.str());
        r["source"] = src;
        std::fprintf(stderr, "%s: %.3f images/s%s\n", src.c_str(), r["images_per_second"].get<double>(),
                     r["unstable"].get<bool>() ? " (unstable)" : "");
        results.push_back(std::move(r));
      }
      Json j;
      j["results"] = results;
      if (results.size() == 2) {
        const double speedup = results[1]["images_per_second"].get<double>() /
                               results[0]["images_per_second"].get<double>();
        const double flop_ratio = results[0]["macs"].get<double>() / results[1]["macs"].get<double>();
        j["speedup"] = speedup;  // second over first
        j["inverse_flop_ratio"] = flop_ratio;
      }
      write_file(dir / "bench.json", j.dump(2) + "\n");
      std::fputs((j.dump(2) + "\n").c_str(), stdout);
    } else if (name == "predict") {
      ModelHandle model;
      check(volc_model_load(model_path.c_str(), &model.p));
      Json preds = Json::array();
      for (const auto& in : inputs) {
        double score = 0.0;
        int label = 0;
        check(volc_predict_path(model.p, in.c_str(), alpha, &score));
        check(volc_classify(score, threshold, &label));
        std::printf("%s\t%.6f\t%d\n", in.c_str(), score, label);
        preds.push_back({{"input", in}, {"score", score}, {"label", label}});
      }
      Json j;
      j["model"] = model_path;
      j["threshold"] = threshold;
      j["predictions"] = std::move(preds);
      write_file(dir / "predictions.json", j.dump(2) + "\n");
    }
    std::fprintf(stderr, "run directory: %s\n", dir.string().c_str());
    return 0;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error (%s): %s\n", volc_status_name(e.status), e.message.c_str());
    return kExitDomain;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDomain;
  }
}
