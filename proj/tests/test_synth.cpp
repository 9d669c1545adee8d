#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "test_util.hpp"
#include "volc/bytes.hpp"
#include "volc/synth.hpp"

using namespace volc;
using testutil::thrown_code;

namespace {

std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const std::filesystem::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

std::size_t hot_pixels(const BandPatch& patch) {
  const RgbComposite c = merge_bands(patch);
  const std::size_t plane = patch.height() * patch.width();
  std::size_t n = 0;
  for (std::size_t i = 0; i < plane; ++i) n += c.pixels[i] >= 0.6f;
  return n;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("same seed, byte-identical files") {
    testutil::TempDir a, b, c;
    const DatasetManifest ma = synth_generate(10, 7, a.path());
    const DatasetManifest mb = synth_generate(10, 7, b.path());
    CHECK(ma == mb);
    const auto ta = tree_bytes(a.path());
    CHECK(ta.size() == 2 * 20 + 1);
    CHECK(ta == tree_bytes(b.path()));
    synth_generate(10, 8, c.path());
    CHECK(ta != tree_bytes(c.path()));
  }

  TEST_CASE("generated manifest is balanced, split and readable") {
    testutil::TempDir dir;
    const DatasetManifest m = synth_generate(10, 3, dir.path());
    CHECK(m.samples.size() == 20);
    CHECK(m.count(Split::kTrain, 1) == 7);
    CHECK(m.count(Split::kVal, 1) == 1);
    CHECK(m.count(Split::kTest, 1) == 2);
    CHECK(load_manifest(dir / kManifestFileName) == m);
    std::set<std::string> negatives;
    for (const auto& e : m.samples) {
      const PatchMeta meta = read_patch_meta(dir.path() / e.path);
      REQUIRE(meta.label.has_value());
      CHECK(*meta.label == e.label);
      CHECK(meta.subclass == e.subclass);
      if (e.label == 0) negatives.insert(e.subclass);
    }
    CHECK(negatives.size() == kNegativeSubclasses.size());
  }

  TEST_CASE("every eruption has at least 50 hot composite pixels") {
    RngStream base(21);
    for (std::uint64_t i = 0; i < 40; ++i) {
      const SynthSample s = synth_sample("eruption", 128, base.fork("e", i), "e");
      CHECK(hot_pixels(s.patch) >= 50);
      CHECK(s.meta.label == 1);
    }
  }

  TEST_CASE("cloudy scenes stay cold in swir2") {
    RngStream base(22);
    for (std::uint64_t i = 0; i < 40; ++i) {
      const SynthSample s = synth_sample("cloudy", 128, base.fork("c", i), "c");
      const auto v = s.patch.bands[kSwir2].values();
      CHECK(*std::max_element(v.begin(), v.end()) <= 0.2f);
      CHECK(s.meta.label == 0);
    }
  }

  TEST_CASE("every synthetic band stays in [0,1]") {
    RngStream base(23);
    for (const std::string sub : {"eruption", "volcano_quiet", "city", "mountain", "cloudy", "random"}) {
      const SynthSample s = synth_sample(sub, 64, base.fork(sub), sub);
      for (const auto& band : s.patch.bands) {
        CHECK(band.shape() == Shape{64, 64});
        for (float v : band.values()) {
          CHECK_UNARY(v >= 0.0f);
          CHECK_UNARY(v <= 1.0f);
        }
      }
    }
  }

  TEST_CASE("bad arguments") {
    testutil::TempDir dir;
    CHECK(thrown_code([&] { synth_generate(0, 1, dir.path()); }) == ErrorCode::kInvalidParameter);
    CHECK(thrown_code([] { synth_sample("volcano", 64, RngStream(1), "x"); }) == ErrorCode::kInvalidParameter);
    // A regular file where a directory is expected.
    write_text(dir / "blocked", "x");
    CHECK(thrown_code([&] { synth_generate(1, 1, dir / "blocked"); }) == ErrorCode::kIo);
  }
}

TEST_SUITE("patch_io") {
  TEST_CASE("band patch and composite round trips") {
    RngStream rng(4);
    SynthSample s = synth_sample("city", 32, rng.fork("p"), "p");
    s.patch.sensor = Sensor::kLandsat7;
    const BandPatch back = decode_band_patch(encode_band_patch(s.patch));
    CHECK(back.sensor == Sensor::kLandsat7);
    for (std::size_t b = 0; b < kBandCount; ++b) CHECK(back.bands[b] == s.patch.bands[b]);

    testutil::TempDir dir;
    write_patch(dir / "p", s.patch, s.meta);
    const PatchMeta meta = read_patch_meta(dir / "p");
    CHECK(meta.id == s.meta.id);
    CHECK(meta.date == s.meta.date);
    CHECK(meta.label == s.meta.label);
    const BandPatch read = read_patch(dir / "p");
    CHECK(read.acquired == s.meta.date);

    const RgbComposite c = merge_bands(s.patch);
    write_composite(dir / "c.vrc", c);
    CHECK(read_composite(dir / "c.vrc").pixels == c.pixels);
  }

  TEST_CASE("corrupted band files are rejected") {
    RngStream rng(4);
    const SynthSample s = synth_sample("random", 16, rng, "r");
    auto bytes = encode_band_patch(s.patch);
    auto magic = bytes;
    magic[0] = 'Z';
    CHECK(thrown_code([&] { decode_band_patch(magic); }) == ErrorCode::kFormat);
    bytes.pop_back();
    CHECK(thrown_code([&] { decode_band_patch(bytes); }) == ErrorCode::kFormat);
    CHECK(thrown_code([] { meta_from_json("{\"label\": 3}"); }) == ErrorCode::kParse);
    CHECK(meta_from_json(meta_to_json({"a", 1.5, -2.0, "2020-01-01", {}, ""})).label == std::nullopt);
  }
}
