#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kcs/model.hpp"
#include "kcs/svm.hpp"
#include "kcs/train.hpp"

namespace kcs {

/// Confusion counts and the derived rates. P_i = correctly classified in
/// class i, N_i = total in class i; Se = P_k/N_k, Sp = P_n/N_n,
/// Acc = (P_k+P_n)/(N_k+N_n). `protocol_mean` rows carry the mean of the
/// per-seed rates (counts are summed for reference), mirroring the
/// multi-split averaging protocol.
struct Metrics {
  long p_k = 0, n_k = 0, p_n = 0, n_n = 0;
  double se = 0.0, sp = 0.0, acc = 0.0;
  bool averaged = false;

  static Metrics from_counts(long p_k, long n_k, long p_n, long n_n);
  static Metrics protocol_mean(const std::vector<Metrics>& runs);
};

struct PredRow {
  std::string id;
  Label truth;
  Label pred_axial;
  Label pred_tangential;
  Label pred_final;  // OR rule: keratoconus if either head says so
};

struct EvalReport {
  Metrics combined;
  Metrics axial_only;
  Metrics tangential_only;
  std::vector<PredRow> rows;
};

/// Per-head argmax, then the worst-case OR combination.
Label predict(DualHeadModelF& model, const Manifest& manifest, const SampleRecord& sample,
              const ChannelStats& stats, PreprocCache& cache);

/// Confusion metrics (combined and per head) over the listed samples.
EvalReport evaluate(DualHeadModelF& model, const Manifest& manifest,
                    const std::vector<std::string>& ids, const ChannelStats& stats,
                    PreprocCache& cache, int batch_size = 32);

void write_prediction_dump(const EvalReport& report, const std::filesystem::path& path);

enum class PpkClass { normal, suspect, keratoconus };

/// PPK bands: < 0.20 normal, [0.20, 0.45) suspect, >= 0.45 keratoconus.
PpkClass ppk_classify(double ppk);
/// Screening-conservative binarization: suspect counts as keratoconus.
Label ppk_binary_map(PpkClass cls);

/// [simk1, simk2, simk1 - simk2, (simk1 + simk2) / 2]; requires simk1 >= simk2.
SimKFeatures simk_features(double simk1, double simk2);

/// One entry of the ablation grid.
struct AblationCell {
  std::string id;
  bool stage2 = false;
  bool domain_aug = false;
  bool mixup_aug = false;
  double stage2_fraction = 0.5;
};

/// The six-row fine-tuning x augmentation grid.
std::vector<AblationCell> table2_grid();
/// Stage-2 data-fraction sweep (domain + mixup, two-stage).
std::vector<AblationCell> fraction_sweep_grid(const std::vector<double>& fractions);

struct AblationConfig {
  std::vector<AblationCell> cells;
  int n_seeds = 5;
  std::uint64_t base_seed = 0;
  ModelConfig model;
  TrainConfig stage1_template = TrainConfig::stage1_defaults();
  TrainConfig stage2_template = TrainConfig::stage2_defaults();
  double stage1_val_fraction = 0.1;
  std::filesystem::path backbone_archive;  // empty: random initialization
  std::filesystem::path work_dir;
  bool verbose = false;
};

struct AblationRow {
  std::string cell_id;
  std::uint64_t seed;  // the split/run seed
  Metrics metrics;
};

struct AblationResult {
  std::vector<AblationRow> per_seed;                       // every (cell, seed)
  std::vector<std::pair<std::string, Metrics>> averaged;   // one row per cell
};

/// Runs every cell over n_seeds split seeds. Cells under one seed share the
/// splits; stage-1 checkpoints are reused across cells that share the same
/// augmentation flags. Evaluation is on the stage-2 test ids.
AblationResult ablation_run(const Manifest& bench, const Manifest& handheld,
                            const AblationConfig& config, PreprocCache& cache);

/// cell_id, seed, Se, Sp, Acc, P_k, N_k, P_n, N_n — per-seed rows, then one
/// "mean" row per cell.
void write_results_table(const AblationResult& result, const std::filesystem::path& path);

/// One row per sample: id, label, 128 FC2 feature values.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<Label> labels;
  std::vector<std::array<float, 128>> features;
};

FeatureTable export_features(DualHeadModelF& model, const Manifest& manifest,
                             const std::vector<std::string>& ids, MapKind head,
                             const ChannelStats& stats, PreprocCache& cache,
                             const std::filesystem::path& out_path);

/// Euclidean distance between the two class centroids of a feature table.
double interclass_centroid_distance(const FeatureTable& table);

}  // namespace kcs
