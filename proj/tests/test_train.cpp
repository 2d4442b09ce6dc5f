#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kcs/evalx.hpp"
#include "kcs/synthcornea.hpp"
#include "kcs/train.hpp"

using namespace kcs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kcs_train_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nn::TensorF probs_of(std::initializer_list<float> rows) {
  std::vector<float> v(rows);
  nn::TensorF t({static_cast<int>(v.size() / 2), 2});
  t.v = v;
  return t;
}

/// Small generated bench set shared by the loop tests.
struct ToyData {
  fs::path dir;
  Manifest manifest;
  SplitPlan plan;
  ChannelStats stats;
};

ToyData make_toy(const std::string& name, int n_normal, int n_kc, std::uint64_t seed) {
  ToyData d;
  d.dir = temp_dir(name);
  GeneratorConfig gen;
  gen.resolution_px = 128;
  d.manifest = generate_dataset(n_normal, n_kc, CaptureProfile::bench(), d.dir, seed, gen);
  // the toy set serves as both bench and handheld for split purposes
  d.plan = make_splits(d.manifest, d.manifest, 0.5, seed);
  PreprocessConfig pc;
  pc.target_resolution = 64;
  d.stats = compute_channel_stats(d.manifest, d.plan.stage1_train, MapKind::axial, pc);
  return d;
}

ModelConfig toy_model_config(std::uint64_t seed) {
  ModelConfig cfg = ModelConfig::desk();
  cfg.input_resolution = 64;
  cfg.seed = seed;
  return cfg;
}

TrainConfig quick_stage1(int epochs, std::uint64_t seed) {
  TrainConfig cfg = TrainConfig::stage1_defaults();
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.geom_aug.enabled = false;
  cfg.mixup.enabled = false;
  cfg.freeze = FreezeSpec::none();
  return cfg;
}

}  // namespace

TEST_CASE("class_weights") {
  SUBCASE("the clinical counts give (0.4484, 1.5516)") {
    const ClassWeights w = class_weights(1637, 473);
    CHECK(std::abs(w.w_normal - 0.4484) < 1e-3);
    CHECK(std::abs(w.w_keratoconus - 1.5516) < 1e-3);
    CHECK(w.w_normal + w.w_keratoconus == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("balanced counts give unit weights") {
    const ClassWeights w = class_weights(100, 100);
    CHECK(w.w_normal == doctest::Approx(1.0));
    CHECK(w.w_keratoconus == doctest::Approx(1.0));
  }

  SUBCASE("doubling both counts changes nothing") {
    const ClassWeights a = class_weights(120, 40);
    const ClassWeights b = class_weights(240, 80);
    CHECK(a.w_normal == doctest::Approx(b.w_normal));
    CHECK(a.w_keratoconus == doctest::Approx(b.w_keratoconus));
  }

  SUBCASE("single class is an error") { CHECK_THROWS(class_weights(10, 0)); }

  SUBCASE("weighting makes the trivial constant predictors cost the same") {
    // expected loss over the label distribution: always-normal vs always-kc
    const std::size_t n_n = 300, n_k = 60;
    const ClassWeights w = class_weights(n_n, n_k);
    const double p = 0.999;  // a confident constant predictor
    // always-normal: kc samples pay -w_k log(1-p); normal pay -w_n log(p)
    const double always_n =
        (n_n * (-w.w_normal * std::log(p)) + n_k * (-w.w_keratoconus * std::log(1 - p)));
    const double always_k =
        (n_n * (-w.w_normal * std::log(1 - p)) + n_k * (-w.w_keratoconus * std::log(p)));
    CHECK(always_n == doctest::Approx(always_k).epsilon(1e-9));
  }
}

TEST_CASE("weighted_ce closed forms") {
  const ClassWeights unit{1.0, 1.0};

  SUBCASE("perfect prediction is ~0") {
    const auto probs = probs_of({1.0f - 1e-6f, 1e-6f});
    const auto target = probs_of({1.0f, 0.0f});
    CHECK(weighted_ce(probs, target, unit) < 1e-5);
  }

  SUBCASE("uniform prediction of a one-hot is ln 2") {
    const auto probs = probs_of({0.5f, 0.5f});
    const auto target = probs_of({1.0f, 0.0f});
    CHECK(weighted_ce(probs, target, unit) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }

  SUBCASE("matching soft target gives its entropy") {
    const auto probs = probs_of({0.3f, 0.7f});
    const auto target = probs_of({0.3f, 0.7f});
    const double expected = -(0.3 * std::log(0.3) + 0.7 * std::log(0.7));
    CHECK(weighted_ce(probs, target, unit) == doctest::Approx(expected).epsilon(1e-6));
  }

  SUBCASE("zero probability under a positive target stays finite") {
    const auto probs = probs_of({0.0f, 1.0f});
    const auto target = probs_of({1.0f, 0.0f});
    const double loss = weighted_ce(probs, target, unit);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));
  }

  SUBCASE("combined_loss is the exact sum and is symmetric") {
    const auto pa = probs_of({0.6f, 0.4f, 0.2f, 0.8f});
    const auto pt = probs_of({0.9f, 0.1f, 0.5f, 0.5f});
    const auto target = probs_of({1.0f, 0.0f, 0.0f, 1.0f});
    const ClassWeights w{0.8, 1.2};
    CHECK(combined_loss(pa, pt, target, w) ==
          doctest::Approx(weighted_ce(pa, target, w) + weighted_ce(pt, target, w)));
    CHECK(combined_loss(pa, pt, target, w) == doctest::Approx(combined_loss(pt, pa, target, w)));
    CHECK(combined_loss(pa, pt, target, w) >= 0.0);
  }
}

TEST_CASE("lr_at") {
  TrainConfig s1 = TrainConfig::stage1_defaults();
  TrainConfig s2 = TrainConfig::stage2_defaults();

  CHECK(lr_at(0, s1) == doctest::Approx(1e-3));
  CHECK(lr_at(57, s1) == doctest::Approx(1e-3));
  CHECK(lr_at(199, s1) == doctest::Approx(1e-3));

  CHECK(lr_at(0, s2) == doctest::Approx(1e-4));
  CHECK(lr_at(50, s2) == doctest::Approx(5e-5));

  SUBCASE("stage-2 schedule is non-increasing and continuous") {
    double prev = lr_at(0, s2);
    for (int e = 1; e < s2.epochs; ++e) {
      const double cur = lr_at(e, s2);
      CHECK(cur <= prev);
      CHECK(prev - cur == doctest::Approx(1e-4 / s2.epochs).epsilon(1e-9));
      prev = cur;
    }
  }

  SUBCASE("out-of-range epochs are rejected") {
    CHECK_THROWS(lr_at(-1, s1));
    CHECK_THROWS(lr_at(200, s1));
    CHECK_THROWS(lr_at(100, s2));
  }
}

TEST_CASE("one-epoch bookkeeping and checkpoint artifacts") {
  const ToyData toy = make_toy("bookkeeping", 20, 12, 3);
  PreprocCache cache(PreprocessConfig{.target_resolution = 64});
  auto model = DualHeadModelF::build(toy_model_config(1));

  TrainConfig cfg = quick_stage1(1, 5);
  const StageResult r =
      train_stage1(model, toy.manifest, toy.plan, cfg, toy.stats, cache, temp_dir("bk_out"));
  CHECK(r.loss_trace.size() == 1);
  CHECK(r.val_loss.size() == 1);
  CHECK(r.val_accuracy.size() == 1);
  CHECK(fs::exists(r.checkpoint));
  CHECK(std::isfinite(r.loss_trace[0]));
}

TEST_CASE("deterministic mode: same seed twice gives identical traces and checkpoints") {
  const ToyData toy = make_toy("determinism", 16, 10, 7);

  auto run = [&](std::uint64_t seed, const std::string& out) {
    PreprocCache cache(PreprocessConfig{.target_resolution = 64});
    auto model = DualHeadModelF::build(toy_model_config(2));
    TrainConfig cfg = quick_stage1(2, seed);
    cfg.geom_aug.enabled = true;  // exercise the full randomized path
    cfg.mixup.enabled = true;
    return run_training(model, {&toy.manifest, toy.plan.stage1_train, toy.plan.stage1_val}, cfg,
                        toy.stats, cache, temp_dir(out), "stage1");
  };

  const StageResult a = run(9, "det_a");
  const StageResult b = run(9, "det_b");
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.val_accuracy == b.val_accuracy);

  std::ifstream fa(a.checkpoint, std::ios::binary), fb(b.checkpoint, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(fa)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(fb)), {});
  CHECK(bytes_a == bytes_b);

  const StageResult c = run(10, "det_c");
  CHECK(a.loss_trace != c.loss_trace);
}

TEST_CASE("stage-2 contract") {
  const ToyData toy = make_toy("stage2", 14, 10, 11);
  PreprocCache cache(PreprocessConfig{.target_resolution = 64});
  auto model = DualHeadModelF::build(toy_model_config(3));

  SUBCASE("0-epoch stage 2 is a no-op on the weights") {
    const auto before = model.named_state();
    std::vector<std::vector<float>> saved;
    for (auto& [name, t] : before) saved.push_back(t->v);

    TrainConfig cfg = TrainConfig::stage2_defaults();
    cfg.epochs = 0;
    cfg.seed = 1;
    cfg.freeze = FreezeSpec::none();
    const StageResult r =
        train_stage2(model, toy.manifest, toy.plan, cfg, toy.stats, cache, temp_dir("s2_noop"));
    CHECK(r.loss_trace.empty());
    auto after = model.named_state();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i].second->v == saved[i]);
  }

  SUBCASE("train/test overlap is rejected") {
    SplitPlan bad = toy.plan;
    bad.stage2_test.push_back(bad.stage2_train.front());
    TrainConfig cfg = TrainConfig::stage2_defaults();
    cfg.epochs = 0;
    CHECK_THROWS(train_stage2(model, toy.manifest, bad, cfg, toy.stats, cache,
                              temp_dir("s2_overlap")));
  }

  SUBCASE("divergence guard reports the offending batch") {
    TrainConfig cfg = TrainConfig::stage2_defaults();
    cfg.epochs = 1;
    cfg.lr_init = 1e18;  // force a blow-up
    cfg.freeze = FreezeSpec::none();
    cfg.seed = 2;
    try {
      StageResult r = train_stage2(model, toy.manifest, toy.plan, cfg, toy.stats, cache,
                                   temp_dir("s2_diverge"));
      // a single enormous step may survive one epoch; rerun once more
      StageResult r2 = train_stage2(model, toy.manifest, toy.plan, cfg, toy.stats, cache,
                                    temp_dir("s2_diverge2"));
      (void)r;
      (void)r2;
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    }
  }
}

TEST_CASE("30-epoch desk run learns: final loss < initial (median over 3 seeds)") {
  // 400-sample bench set, desk profile
  const fs::path dir = temp_dir("learn400");
  GeneratorConfig gen;
  gen.resolution_px = 128;
  const Manifest manifest =
      generate_dataset(300, 100, CaptureProfile::bench(), dir, 13, gen);
  const SplitPlan plan = make_splits(manifest, manifest, 0.5, 13);
  PreprocessConfig pc;
  pc.target_resolution = 128;
  const ChannelStats stats =
      compute_channel_stats(manifest, plan.stage1_train, MapKind::axial, pc);

  int improved = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    PreprocCache cache(pc);
    ModelConfig mc = ModelConfig::desk();
    mc.seed = seed;
    auto model = DualHeadModelF::build(mc);
    TrainConfig cfg = TrainConfig::stage1_defaults();
    cfg.apply_desk_scale();
    cfg.seed = seed;
    cfg.freeze = FreezeSpec::paper_default();
    const StageResult r = train_stage1(model, manifest, plan, cfg, stats, cache,
                                       temp_dir("learn_out" + std::to_string(seed)));
    REQUIRE(r.loss_trace.size() == 30);
    if (r.loss_trace.back() < r.loss_trace.front()) ++improved;
  }
  CHECK(improved >= 2);  // median improves
}
