// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <stdlib.h>

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "volc/volc.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Dir {
  fs::path path;
  Dir() {
    std::string tmpl = (fs::temp_directory_path() / "volc_capi_XXXXXX").string();
    path = mkdtemp(tmpl.data());
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  volc_free_string(s);
  return out;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(volc_status_name(VOLC_OK)) == "ok");
  CHECK(std::string(volc_status_name(VOLC_ERR_CHECKSUM)) == "checksum");
  CHECK(std::string(volc_version()).size() > 0);
  CHECK(std::string(volc_build_id()).rfind(volc_version(), 0) == 0);
}

TEST_CASE("classify and confusion") {
  int label = -1;
  CHECK(volc_classify(0.88, 0.5, &label) == VOLC_OK);
  CHECK(label == 1);
  CHECK(volc_classify(0.5, 0.5, &label) == VOLC_OK);
  CHECK(label == 1);
  label = 7;
  CHECK(volc_classify(1.5, 0.5, &label) == VOLC_ERR_INVALID_SCORE);
  CHECK(label == 7);
  CHECK(std::string(volc_last_error()).find("outside") != std::string::npos);

  const double scores[] = {0.9, 0.2, 0.7, 0.1};
  const int labels[] = {1, 1, 0, 0};
  size_t tp = 0, fn = 0, tn = 0, fp = 0;
  CHECK(volc_confusion(scores, labels, 4, 0.5, &tp, &fn, &tn, &fp) == VOLC_OK);
  CHECK(tp == 1);
  CHECK(fn == 1);
  CHECK(tn == 1);
  CHECK(fp == 1);
  const int one_class[] = {1, 1, 1, 1};
  CHECK(volc_confusion(scores, one_class, 4, 0.5, &tp, &fn, &tn, &fp) == VOLC_ERR_UNDEFINED_RATE);
  CHECK(volc_confusion(nullptr, labels, 4, 0.5, &tp, &fn, &tn, &fp) == VOLC_ERR_INVALID_PARAMETER);
}

TEST_CASE("model lifecycle") {
  Dir dir;
  volc_model* model = nullptr;
  CHECK(volc_model_create("medium", 64, 1, &model) == VOLC_ERR_INVALID_PARAMETER);
  CHECK(model == nullptr);
  CHECK(volc_model_create("big", 64, 1, &model) == VOLC_ERR_SHAPE);
  REQUIRE(volc_model_create("small", 64, 1, &model) == VOLC_OK);
  uint64_t params = 0, macs = 0;
  uint32_t side = 0;
  CHECK(volc_model_param_count(model, &params) == VOLC_OK);
  CHECK(params == 405889);
  CHECK(volc_model_flop_count(model, &macs) == VOLC_OK);
  CHECK(macs > 0);
  CHECK(volc_model_input_size(model, &side) == VOLC_OK);
  CHECK(side == 64);
  char* desc = nullptr;
  REQUIRE(volc_model_describe(model, &desc) == VOLC_OK);
  const json d = json::parse(take(desc));
  CHECK(d.at("name") == "small");

  std::vector<float> pixels(3 * 64 * 64, 0.3f);
  double s1 = -1, s2 = -1;
  CHECK(volc_predict_pixels(model, pixels.data(), 3, 64, 64, &s1) == VOLC_OK);
  CHECK(volc_predict_pixels(model, pixels.data(), 3, 64, 64, &s2) == VOLC_OK);
  CHECK(s1 == s2);
  CHECK(s1 > 0.0);
  CHECK(s1 < 1.0);
  CHECK(volc_predict_pixels(model, pixels.data(), 3, 32, 32, &s2) == VOLC_ERR_SHAPE);

  const std::string path = (dir.path / "m.volcm").string();
  size_t bytes = 0;
  CHECK(volc_model_save(model, path.c_str(), &bytes) == VOLC_OK);
  CHECK(bytes == fs::file_size(path));
  volc_model* back = nullptr;
  REQUIRE(volc_model_load(path.c_str(), &back) == VOLC_OK);
  double s3 = -1;
  CHECK(volc_predict_pixels(back, pixels.data(), 3, 64, 64, &s3) == VOLC_OK);
  CHECK(s3 == s1);
  volc_model_free(back);

  fs::resize_file(path, bytes / 2);
  back = nullptr;
  CHECK(volc_model_load(path.c_str(), &back) == VOLC_ERR_INTEGRITY);
  CHECK(back == nullptr);
  CHECK(volc_model_load((dir.path / "none.volcm").string().c_str(), &back) == VOLC_ERR_IO);

  char* bench = nullptr;
  CHECK(volc_benchmark(model, 2, 2, 1, 0, &bench) == VOLC_ERR_INVALID_PARAMETER);
  REQUIRE(volc_benchmark(model, 2, 3, 1, 0, &bench) == VOLC_OK);
  const json b = json::parse(take(bench));
  CHECK(b.at("images_per_second").get<double>() > 0.0);
  volc_model_free(model);
  volc_model_free(nullptr);
}

TEST_CASE("synth, train, evaluate through the C API") {
  Dir dir;
  const std::string root = (dir.path / "data").string();
  char* summary = nullptr;
  REQUIRE(volc_synth(10, 7, 32, root.c_str(), &summary) == VOLC_OK);
  CHECK(json::parse(take(summary)).is_object());

  volc_model* model = nullptr;
  char* report = nullptr;
  char* curves = nullptr;
  struct Count {
    size_t epochs = 0;
  } count;
  auto on_epoch = [](size_t, double, double, double, double, void* user) { ++static_cast<Count*>(user)->epochs; };
  REQUIRE(volc_train("small", 32, root.c_str(), "{\"epochs\": 2, \"epoch_len\": 16, \"batch_size\": 8}", on_epoch,
                     &count, &model, &report, &curves) == VOLC_OK);
  CHECK(count.epochs == 2);
  CHECK(json::parse(take(report)).at("epochs").size() == 2);
  CHECK(take(curves).rfind("epoch,", 0) == 0);

  char* eval = nullptr;
  REQUIRE(volc_evaluate(model, root.c_str(), "test", 0.5, 2.5, &eval) == VOLC_OK);
  const json e = json::parse(take(eval));
  CHECK(e.at("tp").get<int>() + e.at("fn").get<int>() + e.at("tn").get<int>() + e.at("fp").get<int>() ==
        e.at("samples").get<int>());
  CHECK(volc_evaluate(model, root.c_str(), "holdout", 0.5, 2.5, &eval) == VOLC_ERR_INVALID_PARAMETER);

  const fs::path first = *fs::directory_iterator(dir.path / "data" / "samples");
  double score = -1;
  CHECK(volc_predict_path(model, first.string().c_str(), 2.5, &score) == VOLC_OK);
  CHECK(score >= 0.0);
  volc_model_free(model);

  volc_model* none = nullptr;
  CHECK(volc_train("small", 32, root.c_str(), "{\"epochz\": 2}", nullptr, nullptr, &none, nullptr, nullptr) ==
        VOLC_ERR_INVALID_PARAMETER);
  CHECK(none == nullptr);
  CHECK(volc_train("small", 32, root.c_str(), "{", nullptr, nullptr, &none, nullptr, nullptr) == VOLC_ERR_PARSE);
}
