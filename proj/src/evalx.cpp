#include "kcs/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

namespace kcs {

Metrics Metrics::from_counts(long p_k, long n_k, long p_n, long n_n) {
  if (p_k > n_k || p_n > n_n || p_k < 0 || p_n < 0)
    throw std::runtime_error("Metrics: inconsistent confusion counts");
  Metrics m;
  m.p_k = p_k;
  m.n_k = n_k;
  m.p_n = p_n;
  m.n_n = n_n;
  m.se = n_k > 0 ? static_cast<double>(p_k) / n_k : 0.0;
  m.sp = n_n > 0 ? static_cast<double>(p_n) / n_n : 0.0;
  m.acc = (n_k + n_n) > 0 ? static_cast<double>(p_k + p_n) / (n_k + n_n) : 0.0;
  return m;
}

Metrics Metrics::protocol_mean(const std::vector<Metrics>& runs) {
  if (runs.empty()) throw std::runtime_error("Metrics::protocol_mean: no runs");
  Metrics m;
  m.averaged = true;
  for (const auto& r : runs) {
    m.p_k += r.p_k;
    m.n_k += r.n_k;
    m.p_n += r.p_n;
    m.n_n += r.n_n;
    m.se += r.se;
    m.sp += r.sp;
    m.acc += r.acc;
  }
  const double n = static_cast<double>(runs.size());
  m.se /= n;
  m.sp /= n;
  m.acc /= n;
  return m;
}

namespace {

struct HeadPreds {
  std::vector<Label> axial, tangential;
};

HeadPreds forward_labels(DualHeadModelF& model, const Manifest& manifest,
                         const std::vector<const SampleRecord*>& samples,
                         const ChannelStats& stats, PreprocCache& cache, int batch_size) {
  const int res = model.config().input_resolution;
  const std::size_t stride = static_cast<std::size_t>(3) * res * res;
  HeadPreds preds;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    const int b = static_cast<int>(end - start);
    nn::TensorF ax({b, 3, res, res}), tg({b, 3, res, res});
    for (int i = 0; i < b; ++i) {
      const auto ta = cache.tensor(manifest, *samples[start + i], MapKind::axial, stats);
      const auto tt = cache.tensor(manifest, *samples[start + i], MapKind::tangential, stats);
      std::copy(ta.v.begin(), ta.v.end(), ax.v.begin() + i * stride);
      std::copy(tt.v.begin(), tt.v.end(), tg.v.begin() + i * stride);
    }
    const auto out = model.forward(ax, tg, false, nullptr);
    for (int i = 0; i < b; ++i) {
      preds.axial.push_back(out.prob_axial.v[i * 2 + 1] > out.prob_axial.v[i * 2]
                                ? Label::keratoconus
                                : Label::normal);
      preds.tangential.push_back(out.prob_tangential.v[i * 2 + 1] > out.prob_tangential.v[i * 2]
                                     ? Label::keratoconus
                                     : Label::normal);
    }
  }
  return preds;
}

ModelConfig with_seed(ModelConfig cfg, std::uint64_t seed) {
  cfg.seed = derive_seed(seed, "model-seed");
  return cfg;
}

Metrics metrics_from_rows(const std::vector<Label>& truth, const std::vector<Label>& pred) {
  long p_k = 0, n_k = 0, p_n = 0, n_n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == Label::keratoconus) {
      ++n_k;
      if (pred[i] == Label::keratoconus) ++p_k;
    } else {
      ++n_n;
      if (pred[i] == Label::normal) ++p_n;
    }
  }
  return Metrics::from_counts(p_k, n_k, p_n, n_n);
}

}  // namespace

Label predict(DualHeadModelF& model, const Manifest& manifest, const SampleRecord& sample,
              const ChannelStats& stats, PreprocCache& cache) {
  const auto preds = forward_labels(model, manifest, {&sample}, stats, cache, 1);
  return (preds.axial[0] == Label::keratoconus || preds.tangential[0] == Label::keratoconus)
             ? Label::keratoconus
             : Label::normal;
}

EvalReport evaluate(DualHeadModelF& model, const Manifest& manifest,
                    const std::vector<std::string>& ids, const ChannelStats& stats,
                    PreprocCache& cache, int batch_size) {
  if (ids.empty()) throw std::runtime_error("evaluate: empty sample list");
  std::vector<const SampleRecord*> samples;
  samples.reserve(ids.size());
  for (const auto& id : ids) samples.push_back(&manifest.by_id(id));

  const HeadPreds preds = forward_labels(model, manifest, samples, stats, cache, batch_size);

  EvalReport report;
  std::vector<Label> truth, final_pred;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    PredRow row;
    row.id = samples[i]->id;
    row.truth = samples[i]->label;
    row.pred_axial = preds.axial[i];
    row.pred_tangential = preds.tangential[i];
    row.pred_final = (preds.axial[i] == Label::keratoconus ||
                      preds.tangential[i] == Label::keratoconus)
                         ? Label::keratoconus
                         : Label::normal;
    truth.push_back(row.truth);
    final_pred.push_back(row.pred_final);
    report.rows.push_back(std::move(row));
  }
  report.combined = metrics_from_rows(truth, final_pred);
  report.axial_only = metrics_from_rows(truth, preds.axial);
  report.tangential_only = metrics_from_rows(truth, preds.tangential);

  // set-theoretic consequence of the OR rule; a violation means a bug
  if (report.combined.se + 1e-12 < std::max(report.axial_only.se, report.tangential_only.se) ||
      report.combined.sp - 1e-12 > std::min(report.axial_only.sp, report.tangential_only.sp))
    throw std::logic_error("evaluate: OR-rule dominance violated");
  return report;
}

void write_prediction_dump(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write prediction dump: " + path.string());
  out << "id\tlabel\tpred_axial\tpred_tangential\tpred_final\n";
  for (const auto& r : report.rows)
    out << r.id << '\t' << to_string(r.truth) << '\t' << to_string(r.pred_axial) << '\t'
        << to_string(r.pred_tangential) << '\t' << to_string(r.pred_final) << '\n';
}

PpkClass ppk_classify(double ppk) {
  if (ppk < 0.0 || ppk > 1.0)
    throw std::runtime_error("ppk_classify: value outside [0,1]: " + std::to_string(ppk));
  if (ppk < 0.20) return PpkClass::normal;
  if (ppk < 0.45) return PpkClass::suspect;
  return PpkClass::keratoconus;
}

Label ppk_binary_map(PpkClass cls) {
  return cls == PpkClass::normal ? Label::normal : Label::keratoconus;
}

SimKFeatures simk_features(double simk1, double simk2) {
  if (simk1 < simk2) throw std::runtime_error("simk_features: simk1 must be >= simk2");
  return {simk1, simk2, simk1 - simk2, 0.5 * (simk1 + simk2)};
}

std::vector<AblationCell> table2_grid() {
  return {
      {"stage1_none", false, false, false, 0.5},
      {"stage1_mixup", false, false, true, 0.5},
      {"stage1_domain", false, true, false, 0.5},
      {"stage1_domain_mixup", false, true, true, 0.5},
      {"stage12_none", true, false, false, 0.5},
      {"stage12_domain_mixup", true, true, true, 0.5},
  };
}

std::vector<AblationCell> fraction_sweep_grid(const std::vector<double>& fractions) {
  std::vector<AblationCell> cells;
  for (const double f : fractions) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "stage12_dm_frac%.2f", f);
    cells.push_back({buf, true, true, true, f});
  }
  return cells;
}

AblationResult ablation_run(const Manifest& bench, const Manifest& handheld,
                            const AblationConfig& config, PreprocCache& cache) {
  AblationResult result;
  std::map<std::string, std::vector<Metrics>> by_cell;

  for (int k = 0; k < config.n_seeds; ++k) {
    const std::uint64_t seed = derive_seed(config.base_seed, "ablation-seed", k);

    // splits by stage-2 fraction (the stage-1 part is fraction-independent)
    std::map<double, SplitPlan> plans;
    for (const auto& cell : config.cells)
      if (!plans.count(cell.stage2_fraction))
        plans.emplace(cell.stage2_fraction,
                      make_splits(bench, handheld, cell.stage2_fraction, seed,
                                  config.stage1_val_fraction));
    const SplitPlan& base_plan = plans.begin()->second;

    const ChannelStats stats =
        compute_channel_stats(bench, base_plan.stage1_train, MapKind::axial, cache.config());

    // stage-1 checkpoints, shared across cells with the same augmentations
    std::map<std::pair<bool, bool>, std::filesystem::path> stage1_ckpts;
    for (const auto& cell : config.cells) {
      const auto key = std::make_pair(cell.domain_aug, cell.mixup_aug);
      if (stage1_ckpts.count(key)) continue;

      TrainConfig cfg = config.stage1_template;
      cfg.seed = derive_seed(seed, "stage1-train");
      cfg.geom_aug.enabled = cell.domain_aug;
      cfg.mixup.enabled = cell.mixup_aug;
      DualHeadModelF model = DualHeadModelF::build(with_seed(config.model, seed));
      if (!config.backbone_archive.empty())
        load_backbone_weights(model, config.backbone_archive);
      char tag[64];
      std::snprintf(tag, sizeof(tag), "s1_seed%d_d%d_m%d", k, cell.domain_aug ? 1 : 0,
                    cell.mixup_aug ? 1 : 0);
      const auto dir = config.work_dir / tag;
      StageResult sr = run_training(model, {&bench, base_plan.stage1_train, base_plan.stage1_val},
                                    cfg, stats, cache, dir, "stage1");
      stage1_ckpts[key] = sr.checkpoint;
      if (config.verbose)
        std::cout << "[ablate] " << tag << " val_acc="
                  << (sr.val_accuracy.empty() ? 0.0 : sr.val_accuracy.back()) << "\n";
    }

    for (const auto& cell : config.cells) {
      const SplitPlan& plan = plans.at(cell.stage2_fraction);
      LoadedCheckpoint lc =
          load_checkpoint(stage1_ckpts.at({cell.domain_aug, cell.mixup_aug}));
      DualHeadModelF model = std::move(lc.model);

      if (cell.stage2) {
        TrainConfig cfg = config.stage2_template;
        cfg.seed = derive_seed(seed, "stage2-train");
        cfg.geom_aug.enabled = cell.domain_aug;
        cfg.mixup.enabled = cell.mixup_aug;
        char tag[80];
        std::snprintf(tag, sizeof(tag), "s2_seed%d_%s", k, cell.id.c_str());
        run_training(model, {&handheld, plan.stage2_train, plan.stage2_train}, cfg, stats, cache,
                     config.work_dir / tag, "stage2");
      }

      const EvalReport report = evaluate(model, handheld, plan.stage2_test, stats, cache);
      result.per_seed.push_back({cell.id, seed, report.combined});
      by_cell[cell.id].push_back(report.combined);
      if (config.verbose)
        std::cout << "[ablate] seed" << k << " " << cell.id << " acc=" << report.combined.acc
                  << " se=" << report.combined.se << " sp=" << report.combined.sp << "\n";
    }
  }

  for (const auto& cell : config.cells)
    result.averaged.emplace_back(cell.id, Metrics::protocol_mean(by_cell.at(cell.id)));
  return result;
}

namespace {

void write_metrics_row(std::ofstream& out, const std::string& cell, const std::string& seed,
                       const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s\t%s\t%.4f\t%.4f\t%.4f\t%ld\t%ld\t%ld\t%ld\n", cell.c_str(),
                seed.c_str(), m.se, m.sp, m.acc, m.p_k, m.n_k, m.p_n, m.n_n);
  out << buf;
}

}  // namespace

void write_results_table(const AblationResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write results table: " + path.string());
  out << "cell_id\tseed\tSe\tSp\tAcc\tP_k\tN_k\tP_n\tN_n\n";
  for (const auto& row : result.per_seed)
    write_metrics_row(out, row.cell_id, std::to_string(row.seed), row.metrics);
  for (const auto& [cell, m] : result.averaged) write_metrics_row(out, cell, "mean", m);
}

FeatureTable export_features(DualHeadModelF& model, const Manifest& manifest,
                             const std::vector<std::string>& ids, MapKind head,
                             const ChannelStats& stats, PreprocCache& cache,
                             const std::filesystem::path& out_path) {
  if (ids.empty()) throw std::runtime_error("export_features: empty sample list");
  const int res = model.config().input_resolution;
  FeatureTable table;
  for (const auto& id : ids) {
    const SampleRecord& r = manifest.by_id(id);
    nn::TensorF t = cache.tensor(manifest, r, head, stats);
    t.reshape({1, 3, res, res});
    const nn::TensorF f = model.extract_features(t, head);
    std::array<float, 128> row;
    std::copy(f.v.begin(), f.v.end(), row.begin());
    table.ids.push_back(id);
    table.labels.push_back(r.label);
    table.features.push_back(row);
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature table: " + out_path.string());
  out << "id\tlabel";
  for (int i = 0; i < 128; ++i) out << "\tf" << i;
  out << '\n';
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << table.ids[i] << '\t' << to_string(table.labels[i]);
    for (int j = 0; j < 128; ++j) {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "\t%.6g", static_cast<double>(table.features[i][j]));
      out << buf;
    }
    out << '\n';
  }
  return table;
}

double interclass_centroid_distance(const FeatureTable& table) {
  std::array<double, 128> c_n{}, c_k{};
  std::size_t n_n = 0, n_k = 0;
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    auto& c = table.labels[i] == Label::normal ? c_n : c_k;
    (table.labels[i] == Label::normal ? n_n : n_k)++;
    for (int j = 0; j < 128; ++j) c[j] += table.features[i][j];
  }
  if (n_n == 0 || n_k == 0)
    throw std::runtime_error("interclass_centroid_distance: both classes required");
  double d2 = 0.0;
  for (int j = 0; j < 128; ++j) {
    const double d = c_n[j] / n_n - c_k[j] / n_k;
    d2 += d * d;
  }
  return std::sqrt(d2);
}

}  // namespace kcs
