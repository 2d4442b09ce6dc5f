// kcscreen — corneal-topography keratoconus screening pipeline CLI.
//
// Subcommands: generate, stats, train, eval, predict, ablate,
// export-features. Every run echoes its resolved configuration to
// <out>/resolved_config.txt. All randomness derives from --seed.
// Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "kcs/config.hpp"
#include "kcs/evalx.hpp"
#include "kcs/synthcornea.hpp"

namespace fs = std::filesystem;
using namespace kcs;

namespace {

fs::path output_root(const fs::path& out) {
  // env override for the output root, mainly for test isolation
  if (const char* root = std::getenv("KCSCREEN_OUT_ROOT"); root && out.is_relative())
    return fs::path(root) / out;
  return out;
}

struct CommonOpts {
  std::uint64_t seed = 0;
  bool desk = false;
  bool deterministic = false;  // accepted for interface parity; runs are
                               // seed-deterministic either way
  std::string config_file;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_flag("--desk", c.desk, "desk-scale profile (128 px, short epochs, small backbone)");
  cmd->add_flag("--deterministic", c.deterministic, "deterministic mode (always on; flag kept for scripts)");
  cmd->add_option("--config", c.config_file, "key=value config file");
}

ModelConfig model_config_for(const CommonOpts& c, const KeyValueConfig& kv) {
  ModelConfig m = c.desk ? ModelConfig::desk() : ModelConfig::paper();
  m.input_resolution = kv.get_int("model.input_resolution", m.input_resolution);
  m.width_base = kv.get_int("model.width_base", m.width_base);
  m.dropout_p = kv.get_double("model.dropout_p", m.dropout_p);
  m.seed = derive_seed(c.seed, "model-seed");
  return m;
}

KeyValueConfig load_kv(const CommonOpts& c) {
  return c.config_file.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config_file);
}

void apply_train_kv(TrainConfig& t, const KeyValueConfig& kv) {
  t.lr_init = kv.get_double("train.lr_init", t.lr_init);
  t.epochs = kv.get_int("train.epochs", t.epochs);
  t.momentum = kv.get_double("train.momentum", t.momentum);
  t.batch_size = kv.get_int("train.batch_size", t.batch_size);
  t.geom_aug.hflip_prob = kv.get_double("aug.hflip_prob", t.geom_aug.hflip_prob);
  t.geom_aug.rot_deg = {kv.get_double("aug.rot_min", t.geom_aug.rot_deg[0]),
                        kv.get_double("aug.rot_max", t.geom_aug.rot_deg[1])};
  t.geom_aug.scale = {kv.get_double("aug.scale_min", t.geom_aug.scale[0]),
                      kv.get_double("aug.scale_max", t.geom_aug.scale[1])};
  t.geom_aug.translate_frac = {
      kv.get_double("aug.translate_min", t.geom_aug.translate_frac[0]),
      kv.get_double("aug.translate_max", t.geom_aug.translate_frac[1])};
  t.mixup.alpha = kv.get_double("mixup.alpha", t.mixup.alpha);
}

void set_aug_mode(TrainConfig& t, const std::string& aug) {
  if (aug == "none") {
    t.geom_aug.enabled = false;
    t.mixup.enabled = false;
  } else if (aug == "domain") {
    t.geom_aug.enabled = true;
    t.mixup.enabled = false;
  } else if (aug == "mixup") {
    t.geom_aug.enabled = false;
    t.mixup.enabled = true;
  } else if (aug == "domain+mixup") {
    t.geom_aug.enabled = true;
    t.mixup.enabled = true;
  } else {
    throw CLI::ValidationError("--aug", "must be none|domain|mixup|domain+mixup");
  }
}

void echo_config(const fs::path& out_dir, KeyValueConfig kv, const CommonOpts& c,
                 const std::string& subcommand) {
  kv.set("run.subcommand", subcommand);
  kv.set_int("run.seed", static_cast<long long>(c.seed));
  kv.set_bool("run.desk", c.desk);
  kv.set_bool("run.deterministic", true);
  fs::create_directories(out_dir);
  kv.write(out_dir / "resolved_config.txt");
}

std::vector<std::string> split_ids(const SplitPlan& plan, const std::string& which) {
  if (which == "stage1-train") return plan.stage1_train;
  if (which == "stage1-val") return plan.stage1_val;
  if (which == "stage2-train") return plan.stage2_train;
  if (which == "stage2-test") return plan.stage2_test;
  throw CLI::ValidationError("--split", "unknown split name: " + which);
}

std::vector<std::string> all_ids(const Manifest& m) {
  std::vector<std::string> ids;
  for (const auto& r : m.records) ids.push_back(r.id);
  return ids;
}

int cmd_generate(const CommonOpts& c, const std::string& profile, int n_normal, int n_kc,
                 const fs::path& out, int resolution) {
  const KeyValueConfig kv0 = load_kv(c);
  GeneratorConfig gen;
  gen.resolution_px = resolution;
  gen.noise_sigma = kv0.get_double("gen.noise_sigma", gen.noise_sigma);
  CaptureProfile cap;
  if (profile == "bench") {
    cap = CaptureProfile::bench();
  } else if (profile == "handheld") {
    cap = CaptureProfile::handheld();
  } else {
    std::cerr << "error: --profile must be bench or handheld\n";
    return 2;
  }
  const fs::path out_dir = output_root(out);
  const Manifest m = generate_dataset(n_normal, n_kc, cap, out_dir, c.seed, gen);
  KeyValueConfig kv = kv0;
  kv.set("generate.profile", profile);
  kv.set_int("generate.normal", n_normal);
  kv.set_int("generate.kc", n_kc);
  kv.set_int("generate.resolution", resolution);
  kv.set_double("generate.noise_sigma", gen.noise_sigma);
  echo_config(out_dir, kv, c, "generate");
  std::cout << "wrote " << m.records.size() << " samples to " << out_dir << "\n";
  return 0;
}

int cmd_stats(const CommonOpts& c, const fs::path& manifest_path, const std::string& map,
              const fs::path& out) {
  const Manifest m = read_manifest(manifest_path);
  PreprocessConfig pc;
  pc.target_resolution = c.desk ? 128 : 512;
  const MapKind kind = map == "tangential" ? MapKind::tangential : MapKind::axial;
  const ChannelStats stats = compute_channel_stats(m, all_ids(m), kind, pc);
  const fs::path out_dir = output_root(out);
  fs::create_directories(out_dir);
  KeyValueConfig kv = load_kv(c);
  for (int ch = 0; ch < 3; ++ch) {
    kv.set_double("stats.mu" + std::to_string(ch), stats.mu[ch]);
    kv.set_double("stats.sigma" + std::to_string(ch), stats.sigma[ch]);
  }
  kv.set_int("stats.n_samples", stats.n_samples);
  kv.write(out_dir / "stats.txt");
  echo_config(out_dir, kv, c, "stats");
  std::cout << "stats written to " << (out_dir / "stats.txt") << "\n";
  return 0;
}

struct TrainOpts {
  int stage = 1;
  fs::path bench_manifest, handheld_manifest, out;
  std::string from_checkpoint, backbone_weights;
  std::string aug = "domain+mixup";
  std::string freeze = "paper";  // paper = stages 1-3, none, or e.g. "1,2"
  std::string crop = "disc";     // disc bounding square | plain centre square
  std::string save_backbone;
  double stage2_fraction = 0.5;
  double stage1_val_fraction = 0.1;
  int epochs_override = -1;
};

bool parse_crop(const std::string& s) {
  if (s == "disc") return true;
  if (s == "center") return false;
  throw CLI::ValidationError("--crop", "must be disc or center");
}

FreezeSpec parse_freeze(const std::string& s) {
  if (s == "paper") return FreezeSpec::paper_default();
  if (s == "none") return FreezeSpec::none();
  FreezeSpec spec;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) spec.stages.insert(std::stoi(tok));
  return spec;
}

int cmd_train(const CommonOpts& c, const TrainOpts& t) {
  const KeyValueConfig kv = load_kv(c);
  const fs::path out_dir = output_root(t.out);
  fs::create_directories(out_dir);

  TrainConfig cfg = t.stage == 1 ? TrainConfig::stage1_defaults() : TrainConfig::stage2_defaults();
  if (c.desk) cfg.apply_desk_scale();
  apply_train_kv(cfg, kv);
  set_aug_mode(cfg, t.aug);
  cfg.freeze = parse_freeze(t.freeze);
  if (t.epochs_override >= 0) cfg.epochs = t.epochs_override;
  cfg.seed = derive_seed(c.seed, "train-stage", t.stage);

  const Manifest bench = read_manifest(t.bench_manifest);
  const Manifest handheld = t.handheld_manifest.empty() ? bench : read_manifest(t.handheld_manifest);
  const SplitPlan plan =
      make_splits(bench, handheld, t.stage2_fraction, c.seed, t.stage1_val_fraction);

  PreprocessConfig pc;
  pc.target_resolution = c.desk ? 128 : 512;
  pc.disc_crop = parse_crop(kv.get("data.crop", t.crop));

  StageResult result;
  if (t.stage == 1) {
    PreprocCache cache(pc);
    const ChannelStats stats =
        compute_channel_stats(bench, plan.stage1_train, MapKind::axial, pc);
    DualHeadModelF model = DualHeadModelF::build(model_config_for(c, kv));
    bool random_init = true;
    if (!t.backbone_weights.empty() && fs::exists(t.backbone_weights)) {
      load_backbone_weights(model, t.backbone_weights);
      random_init = false;
    } else {
      // absent archive: documented fallback to random initialization
      if (!t.backbone_weights.empty())
        std::cout << "warning: backbone archive " << t.backbone_weights << " not found; ";
      std::cout << "using random backbone initialization (results are flagged)\n";
    }
    result = train_stage1(model, bench, plan, cfg, stats, cache, out_dir);
    result.random_init_backbone = random_init;
    CheckpointMeta meta{1, stats, random_init, pc.disc_crop};
    save_checkpoint(model, meta, result.checkpoint);
    if (!t.save_backbone.empty()) save_backbone_archive(model, t.save_backbone);
  } else {
    LoadedCheckpoint lc = load_checkpoint(t.from_checkpoint);
    pc.disc_crop = lc.meta.disc_crop;  // stage 2 preprocesses like stage 1 did
    PreprocCache cache(pc);
    result = train_stage2(lc.model, handheld, plan, cfg, lc.meta.stats, cache, out_dir);
    CheckpointMeta meta{2, lc.meta.stats, lc.meta.random_init_backbone, lc.meta.disc_crop};
    save_checkpoint(lc.model, meta, result.checkpoint);
  }

  KeyValueConfig echo = kv;
  echo.set_int("train.stage", t.stage);
  echo.set_double("train.lr_init", cfg.lr_init);
  echo.set_int("train.epochs", cfg.epochs);
  echo.set_double("train.momentum", cfg.momentum);
  echo.set_int("train.batch_size", cfg.batch_size);
  echo.set("train.aug", t.aug);
  echo.set("train.freeze", t.freeze);
  echo.set("data.crop", pc.disc_crop ? "disc" : "center");
  echo.set_double("split.stage2_fraction", t.stage2_fraction);
  echo.set_double("split.stage1_val_fraction", t.stage1_val_fraction);
  echo.set_bool("train.random_init_backbone", result.random_init_backbone);
  echo_config(out_dir, echo, c, "train");

  std::cout << "stage " << t.stage << " done: checkpoint " << result.checkpoint << " ("
            << result.loss_trace.size() << " epochs, "
            << "final val acc "
            << (result.val_accuracy.empty() ? 0.0 : result.val_accuracy.back()) << ")\n";
  return 0;
}

struct EvalOpts {
  fs::path checkpoint, bench_manifest, handheld_manifest, out;
  std::string split = "stage2-test";
  double stage2_fraction = 0.5;
  double stage1_val_fraction = 0.1;
};

int cmd_eval(const CommonOpts& c, const EvalOpts& e) {
  LoadedCheckpoint lc = load_checkpoint(e.checkpoint);
  const Manifest bench = read_manifest(e.bench_manifest);
  const Manifest handheld =
      e.handheld_manifest.empty() ? bench : read_manifest(e.handheld_manifest);
  const SplitPlan plan =
      make_splits(bench, handheld, e.stage2_fraction, c.seed, e.stage1_val_fraction);

  const bool on_bench = e.split.rfind("stage1", 0) == 0;
  const Manifest& target = on_bench ? bench : handheld;
  const auto ids = e.split == "all" ? all_ids(target) : split_ids(plan, e.split);

  PreprocessConfig pc;
  pc.target_resolution = lc.model.config().input_resolution;
  pc.disc_crop = lc.meta.disc_crop;
  PreprocCache cache(pc);
  const EvalReport report = evaluate(lc.model, target, ids, lc.meta.stats, cache);

  const fs::path out_dir = output_root(e.out);
  fs::create_directories(out_dir);
  write_prediction_dump(report, out_dir / "predictions.tsv");
  AblationResult single;
  single.per_seed.push_back({"eval", c.seed, report.combined});
  single.averaged.emplace_back("eval", report.combined);
  write_results_table(single, out_dir / "metrics.tsv");
  echo_config(out_dir, load_kv(c), c, "eval");

  char line[160];
  std::snprintf(line, sizeof(line), "Se=%.4f Sp=%.4f Acc=%.4f (P_k=%ld/%ld P_n=%ld/%ld)\n",
                report.combined.se, report.combined.sp, report.combined.acc, report.combined.p_k,
                report.combined.n_k, report.combined.p_n, report.combined.n_n);
  std::cout << line;
  return 0;
}

int cmd_predict(const CommonOpts& c, const fs::path& checkpoint, const fs::path& manifest_path) {
  (void)c;
  LoadedCheckpoint lc = load_checkpoint(checkpoint);
  const Manifest m = read_manifest(manifest_path);
  PreprocessConfig pc;
  pc.target_resolution = lc.model.config().input_resolution;
  pc.disc_crop = lc.meta.disc_crop;
  PreprocCache cache(pc);
  const EvalReport report = evaluate(lc.model, m, all_ids(m), lc.meta.stats, cache);
  std::cout << "id\tpred_axial\tpred_tangential\tpred_final\n";
  for (const auto& r : report.rows)
    std::cout << r.id << '\t' << to_string(r.pred_axial) << '\t' << to_string(r.pred_tangential)
              << '\t' << to_string(r.pred_final) << '\n';
  return 0;
}

struct AblateOpts {
  fs::path bench_manifest, handheld_manifest, out;
  std::string grid = "table2";
  std::string fracs = "0.1,0.2,0.3,0.4,0.5";
  std::string backbone_weights;
  std::string crop = "disc";
  int seeds = 5;
  int epochs_stage1 = -1, epochs_stage2 = -1;
};

int cmd_ablate(const CommonOpts& c, const AblateOpts& a) {
  const KeyValueConfig kv = load_kv(c);
  const Manifest bench = read_manifest(a.bench_manifest);
  const Manifest handheld = read_manifest(a.handheld_manifest);
  const fs::path out_dir = output_root(a.out);
  fs::create_directories(out_dir);

  AblationConfig cfg;
  if (a.grid == "table2") {
    cfg.cells = table2_grid();
  } else if (a.grid == "stage2-fraction") {
    std::vector<double> fracs;
    std::stringstream ss(a.fracs);
    for (std::string tok; std::getline(ss, tok, ',');) fracs.push_back(std::stod(tok));
    cfg.cells = fraction_sweep_grid(fracs);
  } else {
    std::cerr << "error: --grid must be table2 or stage2-fraction\n";
    return 2;
  }
  cfg.n_seeds = a.seeds;
  cfg.base_seed = c.seed;
  cfg.model = model_config_for(c, kv);
  cfg.stage1_template = TrainConfig::stage1_defaults();
  cfg.stage2_template = TrainConfig::stage2_defaults();
  if (c.desk) {
    cfg.stage1_template.apply_desk_scale();
    cfg.stage2_template.apply_desk_scale();
  }
  apply_train_kv(cfg.stage1_template, kv);
  apply_train_kv(cfg.stage2_template, kv);
  if (a.epochs_stage1 >= 0) cfg.stage1_template.epochs = a.epochs_stage1;
  if (a.epochs_stage2 >= 0) cfg.stage2_template.epochs = a.epochs_stage2;
  cfg.backbone_archive = a.backbone_weights;
  cfg.work_dir = out_dir / "runs";
  cfg.verbose = true;

  PreprocessConfig pc;
  pc.target_resolution = cfg.model.input_resolution;
  pc.disc_crop = parse_crop(kv.get("data.crop", a.crop));
  PreprocCache cache(pc);

  const AblationResult result = ablation_run(bench, handheld, cfg, cache);
  write_results_table(result, out_dir / "ablation.tsv");
  echo_config(out_dir, kv, c, "ablate");
  std::cout << "ablation table written to " << (out_dir / "ablation.tsv") << "\n";
  return 0;
}

struct ExportOpts {
  fs::path checkpoint, manifest_path, out;
  std::string head = "axial";
  std::string split = "all";
  fs::path bench_manifest;
  double stage2_fraction = 0.5;
};

int cmd_export_features(const CommonOpts& c, const ExportOpts& e) {
  LoadedCheckpoint lc = load_checkpoint(e.checkpoint);
  const Manifest m = read_manifest(e.manifest_path);
  std::vector<std::string> ids;
  if (e.split == "all") {
    ids = all_ids(m);
  } else {
    const Manifest bench = e.bench_manifest.empty() ? m : read_manifest(e.bench_manifest);
    const SplitPlan plan = make_splits(bench, m, e.stage2_fraction, c.seed, 0.1);
    ids = split_ids(plan, e.split);
  }
  PreprocessConfig pc;
  pc.target_resolution = lc.model.config().input_resolution;
  pc.disc_crop = lc.meta.disc_crop;
  PreprocCache cache(pc);
  const fs::path out_dir = output_root(e.out);
  fs::create_directories(out_dir);
  const MapKind head = e.head == "tangential" ? MapKind::tangential : MapKind::axial;
  export_features(lc.model, m, ids, head, lc.meta.stats, cache, out_dir / "features.tsv");
  echo_config(out_dir, load_kv(c), c, "export-features");
  std::cout << "features written to " << (out_dir / "features.tsv") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corneal-topography keratoconus screening pipeline"};
  app.require_subcommand(1);

  CommonOpts common;

  // generate
  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset");
  std::string gen_profile = "bench";
  int gen_normal = 0, gen_kc = 0, gen_res = 512;
  fs::path gen_out;
  gen->add_option("--profile", gen_profile, "bench|handheld")->required();
  gen->add_option("--normal", gen_normal, "number of normal samples")->required();
  gen->add_option("--kc", gen_kc, "number of keratoconus samples")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--res", gen_res, "image resolution (default 512)");
  add_common(gen, common);

  // stats
  auto* stats = app.add_subcommand("stats", "compute channel statistics");
  fs::path stats_manifest, stats_out;
  std::string stats_map = "axial";
  stats->add_option("--manifest", stats_manifest)->required();
  stats->add_option("--map", stats_map, "axial|tangential");
  stats->add_option("--out", stats_out)->required();
  add_common(stats, common);

  // train
  auto* train = app.add_subcommand("train", "run one fine-tuning stage");
  TrainOpts topt;
  train->add_option("--stage", topt.stage, "1 or 2")->required();
  train->add_option("--bench", topt.bench_manifest, "bench manifest")->required();
  train->add_option("--handheld", topt.handheld_manifest, "handheld manifest");
  train->add_option("--out", topt.out)->required();
  train->add_option("--from-checkpoint", topt.from_checkpoint, "stage-1 checkpoint (stage 2)");
  train->add_option("--backbone-weights", topt.backbone_weights, "pretrained backbone archive");
  train->add_option("--freeze", topt.freeze, "paper|none|comma-separated stage list");
  train->add_option("--crop", topt.crop, "disc|center crop policy");
  train->add_option("--save-backbone", topt.save_backbone,
                    "write the trained backbone as a weights archive");
  train->add_option("--aug", topt.aug, "none|domain|mixup|domain+mixup");
  train->add_option("--stage2-fraction", topt.stage2_fraction);
  train->add_option("--stage1-val-fraction", topt.stage1_val_fraction);
  train->add_option("--epochs", topt.epochs_override, "override the epoch budget");
  add_common(train, common);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  EvalOpts eopt;
  eval->add_option("--checkpoint", eopt.checkpoint)->required();
  eval->add_option("--bench", eopt.bench_manifest)->required();
  eval->add_option("--handheld", eopt.handheld_manifest);
  eval->add_option("--split", eopt.split, "stage1-train|stage1-val|stage2-train|stage2-test|all");
  eval->add_option("--stage2-fraction", eopt.stage2_fraction);
  eval->add_option("--stage1-val-fraction", eopt.stage1_val_fraction);
  eval->add_option("--out", eopt.out)->required();
  add_common(eval, common);

  // predict
  auto* predict = app.add_subcommand("predict", "per-sample predictions");
  fs::path pred_ckpt, pred_manifest;
  predict->add_option("--checkpoint", pred_ckpt)->required();
  predict->add_option("--manifest", pred_manifest)->required();
  add_common(predict, common);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "fine-tuning / augmentation ablations");
  AblateOpts aopt;
  ablate->add_option("--bench", aopt.bench_manifest)->required();
  ablate->add_option("--handheld", aopt.handheld_manifest)->required();
  ablate->add_option("--grid", aopt.grid, "table2|stage2-fraction");
  ablate->add_option("--fracs", aopt.fracs, "comma-separated stage-2 fractions");
  ablate->add_option("--backbone-weights", aopt.backbone_weights, "pretrained backbone archive");
  ablate->add_option("--crop", aopt.crop, "disc|center crop policy");
  ablate->add_option("--seeds", aopt.seeds, "number of split seeds");
  ablate->add_option("--epochs-stage1", aopt.epochs_stage1);
  ablate->add_option("--epochs-stage2", aopt.epochs_stage2);
  ablate->add_option("--out", aopt.out)->required();
  add_common(ablate, common);

  // export-features
  auto* exportf = app.add_subcommand("export-features", "dump FC2 features");
  ExportOpts xopt;
  exportf->add_option("--checkpoint", xopt.checkpoint)->required();
  exportf->add_option("--manifest", xopt.manifest_path)->required();
  exportf->add_option("--head", xopt.head, "axial|tangential");
  exportf->add_option("--split", xopt.split, "all|stage2-train|stage2-test");
  exportf->add_option("--bench", xopt.bench_manifest, "bench manifest (for split modes)");
  exportf->add_option("--stage2-fraction", xopt.stage2_fraction);
  exportf->add_option("--out", xopt.out)->required();
  add_common(exportf, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_generate(common, gen_profile, gen_normal, gen_kc, gen_out, gen_res);
    if (stats->parsed()) return cmd_stats(common, stats_manifest, stats_map, stats_out);
    if (train->parsed()) {
      if (topt.stage != 1 && topt.stage != 2) {
        std::cerr << "error: --stage must be 1 or 2\n";
        return 2;
      }
      if (topt.stage == 2 && topt.from_checkpoint.empty()) {
        std::cerr << "error: stage 2 requires --from-checkpoint\n";
        return 2;
      }
      if (topt.stage == 2 && topt.handheld_manifest.empty()) {
        std::cerr << "error: stage 2 requires --handheld\n";
        return 2;
      }
      return cmd_train(common, topt);
    }
    if (eval->parsed()) return cmd_eval(common, eopt);
    if (predict->parsed()) return cmd_predict(common, pred_ckpt, pred_manifest);
    if (ablate->parsed()) return cmd_ablate(common, aopt);
    if (exportf->parsed()) return cmd_export_features(common, xopt);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
