#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "kcs/dataio.hpp"
#include "kcs/synthcornea.hpp"

using namespace kcs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kcs_dataio_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SampleRecord make_record(const std::string& id, Label label, Source source) {
  SampleRecord r;
  r.id = id;
  r.axial_path = "images/" + id + "_axial.png";
  r.tangential_path = "images/" + id + "_tangential.png";
  r.simk1 = 45.5;
  r.simk2 = 43.25;
  r.ppk = label == Label::keratoconus ? std::optional<double>(0.7) : std::nullopt;
  r.label = label;
  r.source = source;
  r.seed = 12345;
  return r;
}

ImageRgb8 uniform_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return ImageRgb8(w, h, {r, g, b});
}

/// Synthetic manifest with real PNG files on disk.
Manifest fake_dataset(const fs::path& dir, const std::vector<Label>& labels, Source source) {
  fs::create_directories(dir / "images");
  Manifest m;
  m.base_dir = dir;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SampleRecord r = make_record("s" + std::to_string(i), labels[i], source);
    const std::uint8_t shade = static_cast<std::uint8_t>(40 + 10 * (i % 8));
    write_png(uniform_image(64, 64, shade, 80, 120), m.axial_abs(r));
    write_png(uniform_image(64, 64, 120, shade, 80), m.tangential_abs(r));
    m.records.push_back(std::move(r));
  }
  write_manifest(m, dir / "manifest.tsv");
  return m;
}

}  // namespace

TEST_CASE("manifest round trip") {
  const fs::path dir = temp_dir("roundtrip");

  SUBCASE("empty file reads as empty list") {
    std::ofstream(dir / "empty.tsv").close();
    CHECK(read_manifest(dir / "empty.tsv").records.empty());
  }

  SUBCASE("write then read preserves records in order") {
    Manifest m;
    m.base_dir = dir;
    m.records = {make_record("a", Label::normal, Source::bench),
                 make_record("b", Label::keratoconus, Source::handheld),
                 make_record("c", Label::normal, Source::bench)};
    write_manifest(m, dir / "m.tsv");
    const Manifest back = read_manifest(dir / "m.tsv");
    REQUIRE(back.records.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back.records[i].id == m.records[i].id);
      CHECK(back.records[i].axial_path == m.records[i].axial_path);
      CHECK(back.records[i].simk1 == doctest::Approx(m.records[i].simk1));
      CHECK(back.records[i].simk2 == doctest::Approx(m.records[i].simk2));
      CHECK(back.records[i].label == m.records[i].label);
      CHECK(back.records[i].source == m.records[i].source);
      CHECK(back.records[i].seed == m.records[i].seed);
      CHECK(back.records[i].ppk.has_value() == m.records[i].ppk.has_value());
    }
  }

  SUBCASE("wrong field count names the line") {
    std::ofstream out(dir / "bad.tsv");
    out << "id\tonly\teight\tfields\there\tnot\tnine\tok\n";
    out.close();
    try {
      read_manifest(dir / "bad.tsv");
      FAIL("expected parse error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
  }

  SUBCASE("missing image is caught at validation, not read") {
    Manifest m;
    m.base_dir = dir;
    m.records = {make_record("ghost", Label::normal, Source::bench)};
    write_manifest(m, dir / "ghost.tsv");
    const Manifest back = read_manifest(dir / "ghost.tsv");  // ok
    CHECK_THROWS(validate_manifest(back));
  }
}

TEST_CASE("compute_channel_stats") {
  const fs::path dir = temp_dir("stats");
  fs::create_directories(dir / "images");
  PreprocessConfig cfg;
  cfg.target_resolution = 64;

  SUBCASE("uniform gray image has mu = 128/255 and floored sigma") {
    Manifest m;
    m.base_dir = dir;
    SampleRecord r = make_record("gray", Label::normal, Source::bench);
    write_png(uniform_image(64, 64, 128, 128, 128), m.axial_abs(r));
    write_png(uniform_image(64, 64, 128, 128, 128), m.tangential_abs(r));
    m.records.push_back(r);
    const ChannelStats s = compute_channel_stats(m, {"gray"}, MapKind::axial, cfg);
    for (int c = 0; c < 3; ++c) {
      CHECK(s.mu[c] == doctest::Approx(128.0 / 255.0));
      CHECK(s.sigma[c] == ChannelStats::kSigmaFloor);
    }
  }

  SUBCASE("all-black plus all-white: mu at midpoint, sigma = half-range") {
    Manifest m;
    m.base_dir = dir;
    SampleRecord r0 = make_record("black", Label::normal, Source::bench);
    SampleRecord r1 = make_record("white", Label::keratoconus, Source::bench);
    // disc detection would fail on all-black; use the plain centre crop
    cfg.disc_crop = false;
    write_png(uniform_image(64, 64, 0, 0, 0), m.axial_abs(r0));
    write_png(uniform_image(64, 64, 255, 255, 255), m.axial_abs(r1));
    write_png(uniform_image(64, 64, 0, 0, 0), m.tangential_abs(r0));
    write_png(uniform_image(64, 64, 255, 255, 255), m.tangential_abs(r1));
    m.records = {r0, r1};
    const ChannelStats s = compute_channel_stats(m, {"black", "white"}, MapKind::axial, cfg);
    for (int c = 0; c < 3; ++c) {
      CHECK(s.mu[c] == doctest::Approx(0.5));
      CHECK(s.sigma[c] == doctest::Approx(0.5));
    }

    SUBCASE("permuting the sample list gives bitwise identical stats") {
      const ChannelStats s2 = compute_channel_stats(m, {"white", "black"}, MapKind::axial, cfg);
      for (int c = 0; c < 3; ++c) {
        CHECK(s.mu[c] == s2.mu[c]);
        CHECK(s.sigma[c] == s2.sigma[c]);
      }
    }
  }

  SUBCASE("empty id list is an error") {
    Manifest m;
    CHECK_THROWS(compute_channel_stats(m, {}, MapKind::axial, cfg));
  }
}

TEST_CASE("preprocess") {
  PreprocessConfig cfg;
  cfg.target_resolution = 64;

  SUBCASE("image equal to mu gives an all-zero tensor") {
    const ImageRgb8 img = uniform_image(100, 100, 51, 102, 204);
    ChannelStats stats;
    stats.mu = {51.0 / 255.0, 102.0 / 255.0, 204.0 / 255.0};
    stats.sigma = {0.5, 0.5, 0.5};
    const PreprocessedImage out = preprocess(img, stats, cfg);
    for (const float v : out.tensor.v) CHECK(v == doctest::Approx(0.0f).epsilon(1e-6));
  }

  SUBCASE("any input resolution produces the fixed output resolution") {
    const ImageRgb8 img = uniform_image(700, 900, 90, 90, 90);
    const PreprocessedImage out = preprocess(img, ChannelStats::identity(), cfg);
    REQUIRE(out.tensor.shape == std::vector<int>{3, 64, 64});
  }

  SUBCASE("Z-normalization with identity stats is idempotent") {
    const ImageRgb8 img = uniform_image(80, 80, 13, 77, 200);
    ChannelStats stats;
    stats.mu = {0.1, 0.2, 0.3};
    stats.sigma = {0.4, 0.5, 0.6};
    const PreprocessedImage once = preprocess(img, stats, cfg);
    nn::TensorF twice = once.tensor;
    normalize_inplace(twice, ChannelStats::identity());
    CHECK(twice.v == once.tensor.v);
  }

  SUBCASE("all-background image falls back to the centre square and is flagged") {
    const ImageRgb8 img = uniform_image(90, 90, 0, 0, 0);
    const PreprocessedImage out = preprocess(img, ChannelStats::identity(), cfg);
    CHECK(out.disc_detect_failed);
    REQUIRE(out.tensor.shape == std::vector<int>{3, 64, 64});
  }

  SUBCASE("disc crop centres the disc (rendered disc test)") {
    // disc off-centre in a larger frame
    ImageRgb8 img(120, 120, {0, 0, 0});
    for (int y = 0; y < 120; ++y)
      for (int x = 0; x < 120; ++x)
        if (std::hypot(x - 40.0, y - 70.0) <= 25.0) {
          auto* p = img.px(x, y);
          p[0] = 200;
          p[1] = 50;
          p[2] = 30;
        }
    bool failed = true;
    const ImageRgb8 cropped = crop_resize(img, cfg, &failed);
    CHECK_FALSE(failed);
    REQUIRE(cropped.width == 64);
    // the disc centre should now sit near the image centre
    double cx = 0, cy = 0, n = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (cropped.px(x, y)[0] > 50) {
          cx += x;
          cy += y;
          n += 1;
        }
    REQUIRE(n > 0);
    CHECK(std::abs(cx / n - 31.5) < 2.0);
    CHECK(std::abs(cy / n - 31.5) < 2.0);
  }
}

TEST_CASE("make_splits") {
  const fs::path bench_dir = temp_dir("splits_bench");
  const fs::path hh_dir = temp_dir("splits_hh");

  SUBCASE("100 bench samples split 90:10") {
    std::vector<Label> labels(100, Label::normal);
    for (int i = 0; i < 25; ++i) labels[i] = Label::keratoconus;
    const Manifest bench = fake_dataset(bench_dir, labels, Source::bench);
    const Manifest hh = fake_dataset(hh_dir, {Label::normal, Label::keratoconus,
                                              Label::normal, Label::keratoconus},
                                     Source::handheld);
    const SplitPlan plan = make_splits(bench, hh, 0.5, 7);
    CHECK(plan.stage1_train.size() == 90);
    CHECK(plan.stage1_val.size() == 10);

    // stratification within +-1 sample of proportional
    int val_kc = 0;
    for (const auto& id : plan.stage1_val)
      val_kc += bench.by_id(id).label == Label::keratoconus;
    CHECK(std::abs(val_kc - 2.5) <= 1.0);

    // disjoint
    for (const auto& id : plan.stage1_val)
      CHECK(std::find(plan.stage1_train.begin(), plan.stage1_train.end(), id) ==
            plan.stage1_train.end());
  }

  SUBCASE("114 handheld samples at fraction 0.5 split 57:57") {
    std::vector<Label> bench_labels = {Label::normal, Label::keratoconus, Label::normal,
                                       Label::keratoconus};
    std::vector<Label> hh_labels(114, Label::normal);
    for (int i = 0; i < 46; ++i) hh_labels[i] = Label::keratoconus;
    const Manifest bench = fake_dataset(bench_dir, bench_labels, Source::bench);
    const Manifest hh = fake_dataset(hh_dir, hh_labels, Source::handheld);
    const SplitPlan plan = make_splits(bench, hh, 0.5, 3);
    CHECK(plan.stage2_train.size() == 57);
    CHECK(plan.stage2_test.size() == 57);
    int train_kc = 0;
    for (const auto& id : plan.stage2_train)
      train_kc += hh.by_id(id).label == Label::keratoconus;
    CHECK(train_kc == 23);
  }

  SUBCASE("deterministic: same seed, identical plan; different seed differs") {
    std::vector<Label> labels(40, Label::normal);
    for (int i = 0; i < 10; ++i) labels[i] = Label::keratoconus;
    const Manifest bench = fake_dataset(bench_dir, labels, Source::bench);
    const Manifest hh = fake_dataset(hh_dir, labels, Source::handheld);
    const SplitPlan a = make_splits(bench, hh, 0.5, 11);
    const SplitPlan b = make_splits(bench, hh, 0.5, 11);
    CHECK(a.stage1_train == b.stage1_train);
    CHECK(a.stage1_val == b.stage1_val);
    CHECK(a.stage2_train == b.stage2_train);
    CHECK(a.stage2_test == b.stage2_test);
    const SplitPlan c = make_splits(bench, hh, 0.5, 12);
    CHECK(a.stage2_train != c.stage2_train);
  }

  SUBCASE("a class missing from a manifest is an error") {
    const Manifest bench = fake_dataset(bench_dir, {Label::normal, Label::normal}, Source::bench);
    const Manifest hh =
        fake_dataset(hh_dir, {Label::normal, Label::keratoconus}, Source::handheld);
    CHECK_THROWS(make_splits(bench, hh, 0.5, 1));
  }
}

TEST_CASE("sampler_weights") {
  SUBCASE("inverse counts") {
    const std::vector<Label> labels = {Label::keratoconus, Label::normal, Label::normal,
                                       Label::normal};
    const auto w = sampler_weights(labels);
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(1.0 / 3));
    CHECK(w[2] == doctest::Approx(1.0 / 3));
    CHECK(w[3] == doctest::Approx(1.0 / 3));
  }

  SUBCASE("balanced labels give equal weights") {
    const std::vector<Label> labels = {Label::keratoconus, Label::normal, Label::keratoconus,
                                       Label::normal};
    const auto w = sampler_weights(labels);
    for (const double v : w) CHECK(v == doctest::Approx(w[0]));
  }

  SUBCASE("single-class input is an error") {
    CHECK_THROWS(sampler_weights({Label::normal, Label::normal}));
    CHECK_THROWS(sampler_weights({}));
  }

  SUBCASE("weighted draws over a 3:1 set land near uniform (Monte-Carlo oracle)") {
    std::vector<Label> labels(400, Label::normal);
    for (int i = 0; i < 100; ++i) labels[i] = Label::keratoconus;
    const auto w = sampler_weights(labels);
    Rng rng(23);
    const auto draws = weighted_draw(w, 10000, rng);
    std::size_t kc = 0;
    for (const auto idx : draws) kc += labels[idx] == Label::keratoconus;
    const double frac = static_cast<double>(kc) / draws.size();
    CHECK(frac > 0.475);
    CHECK(frac < 0.525);
  }
}
