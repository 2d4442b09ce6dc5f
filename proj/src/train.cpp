#include "kcs/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace kcs {

ClassWeights class_weights(std::size_t n_normal, std::size_t n_keratoconus) {
  if (n_normal == 0 || n_keratoconus == 0)
    throw std::runtime_error("class_weights: both classes must be present");
  const double inv_n = 1.0 / static_cast<double>(n_normal);
  const double inv_k = 1.0 / static_cast<double>(n_keratoconus);
  const double scale = 2.0 / (inv_n + inv_k);
  return {inv_n * scale, inv_k * scale};
}

ClassWeights class_weights(const std::vector<Label>& train_labels) {
  std::size_t n_normal = 0, n_kc = 0;
  for (const Label l : train_labels) (l == Label::normal ? n_normal : n_kc)++;
  return class_weights(n_normal, n_kc);
}

double lr_at(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.epochs)
    throw std::runtime_error("lr_at: epoch " + std::to_string(epoch) + " outside [0," +
                             std::to_string(config.epochs) + ")");
  if (config.stage == 1) return config.lr_init;
  return config.lr_init * (1.0 - static_cast<double>(epoch) / config.epochs);
}

namespace {
constexpr double kLogClamp = 1e-7;
}

template <typename S>
double weighted_ce(const nn::Tensor<S>& probs, const nn::Tensor<S>& targets,
                   const ClassWeights& weights) {
  const int n = probs.dim(0);
  const double w[2] = {weights.w_normal, weights.w_keratoconus};
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 2; ++c) {
      const double t = targets.v[static_cast<std::size_t>(i) * 2 + c];
      if (t == 0.0) continue;
      const double p =
          std::max(static_cast<double>(probs.v[static_cast<std::size_t>(i) * 2 + c]), kLogClamp);
      total -= w[c] * t * std::log(p);
    }
  }
  return total / n;
}

template <typename S>
double combined_loss(const nn::Tensor<S>& prob_axial, const nn::Tensor<S>& prob_tangential,
                     const nn::Tensor<S>& targets, const ClassWeights& weights) {
  return weighted_ce(prob_axial, targets, weights) +
         weighted_ce(prob_tangential, targets, weights);
}

template <typename S>
nn::Tensor<S> ce_logit_grad(const nn::Tensor<S>& probs, const nn::Tensor<S>& targets,
                            const ClassWeights& weights) {
  const int n = probs.dim(0);
  const double w[2] = {weights.w_normal, weights.w_keratoconus};
  nn::Tensor<S> d(probs.shape);
  for (int i = 0; i < n; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * 2;
    const double wt = w[0] * targets.v[off] + w[1] * targets.v[off + 1];
    for (int c = 0; c < 2; ++c)
      d.v[off + c] = static_cast<S>(
          (static_cast<double>(probs.v[off + c]) * wt - w[c] * targets.v[off + c]) / n);
  }
  return d;
}

template double weighted_ce<float>(const nn::Tensor<float>&, const nn::Tensor<float>&,
                                   const ClassWeights&);
template double weighted_ce<double>(const nn::Tensor<double>&, const nn::Tensor<double>&,
                                    const ClassWeights&);
template double combined_loss<float>(const nn::Tensor<float>&, const nn::Tensor<float>&,
                                     const nn::Tensor<float>&, const ClassWeights&);
template double combined_loss<double>(const nn::Tensor<double>&, const nn::Tensor<double>&,
                                      const nn::Tensor<double>&, const ClassWeights&);
template nn::Tensor<float> ce_logit_grad<float>(const nn::Tensor<float>&,
                                                const nn::Tensor<float>&, const ClassWeights&);
template nn::Tensor<double> ce_logit_grad<double>(const nn::Tensor<double>&,
                                                  const nn::Tensor<double>&,
                                                  const ClassWeights&);

void SgdOptimizer::step(std::vector<nn::Param<float>*>& trainable, double lr) {
  for (auto* p : trainable) {
    if (p->velocity.v.size() != p->value.v.size()) {
      p->velocity = nn::Tensor<float>(p->value.shape);
    }
    const float m = static_cast<float>(momentum_);
    const float step_lr = static_cast<float>(lr);
    for (std::size_t i = 0; i < p->value.v.size(); ++i) {
      p->velocity.v[i] = m * p->velocity.v[i] + p->grad.v[i];
      p->value.v[i] -= step_lr * p->velocity.v[i];
    }
  }
}

namespace {

struct BatchTensors {
  nn::TensorF axial, tangential, targets;
};

/// Loads, normalizes, optionally augments and mixes one batch.
BatchTensors assemble_batch(const Manifest& manifest,
                            const std::vector<const SampleRecord*>& samples,
                            const ChannelStats& stats, PreprocCache& cache,
                            const GeomAugConfig* geom, const MixupConfig* mix, Rng* aug_rng,
                            Rng* mix_rng, int resolution) {
  const int b = static_cast<int>(samples.size());
  BatchTensors out;
  out.axial = nn::TensorF({b, 3, resolution, resolution});
  out.tangential = nn::TensorF({b, 3, resolution, resolution});
  out.targets = nn::TensorF({b, 2});
  const std::size_t stride = static_cast<std::size_t>(3) * resolution * resolution;

  std::vector<nn::TensorF> ax(b), tg(b);
  std::vector<std::array<float, 2>> ys(b);
  for (int i = 0; i < b; ++i) {
    ax[i] = cache.tensor(manifest, *samples[i], MapKind::axial, stats);
    tg[i] = cache.tensor(manifest, *samples[i], MapKind::tangential, stats);
    if (geom && geom->enabled) geometric_augment(ax[i], tg[i], *geom, *aug_rng);
    ys[i] = samples[i]->label == Label::keratoconus ? std::array<float, 2>{0.f, 1.f}
                                                    : std::array<float, 2>{1.f, 0.f};
  }

  if (mix && mix->enabled && b > 1) {
    std::vector<int> perm(b);
    for (int i = 0; i < b; ++i) perm[i] = i;
    mix_rng->shuffle(perm);
    std::vector<nn::TensorF> ax_m(b), tg_m(b);
    std::vector<std::array<float, 2>> ys_m(b);
    for (int i = 0; i < b; ++i) {
      const double lambda = draw_lambda(*mix, *mix_rng);
      const int j = perm[i];
      std::array<float, 2> ymix;
      mixup(ax[i], ys[i], ax[j], ys[j], lambda, &ax_m[i], &ymix);
      mixup(tg[i], ys[i], tg[j], ys[j], lambda, &tg_m[i], &ys_m[i]);
      ys_m[i] = ymix;  // one lambda per pair, shared by both maps
    }
    ax = std::move(ax_m);
    tg = std::move(tg_m);
    ys = std::move(ys_m);
  }

  for (int i = 0; i < b; ++i) {
    std::copy(ax[i].v.begin(), ax[i].v.end(), out.axial.v.begin() + i * stride);
    std::copy(tg[i].v.begin(), tg[i].v.end(), out.tangential.v.begin() + i * stride);
    out.targets.v[static_cast<std::size_t>(i) * 2] = ys[i][0];
    out.targets.v[static_cast<std::size_t>(i) * 2 + 1] = ys[i][1];
  }
  return out;
}

struct ValMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

ValMetrics validate(DualHeadModelF& model, const Manifest& manifest,
                    const std::vector<const SampleRecord*>& samples, const ChannelStats& stats,
                    PreprocCache& cache, const ClassWeights& weights, int batch_size,
                    int resolution) {
  ValMetrics vm;
  if (samples.empty()) return vm;
  double loss_sum = 0.0;
  int correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const SampleRecord*> chunk(samples.begin() + start, samples.begin() + end);
    BatchTensors batch = assemble_batch(manifest, chunk, stats, cache, nullptr, nullptr, nullptr,
                                        nullptr, resolution);
    const auto out = model.forward(batch.axial, batch.tangential, false, nullptr);
    loss_sum += combined_loss(out.prob_axial, out.prob_tangential, batch.targets, weights) *
                static_cast<double>(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const bool kc_ax = out.prob_axial.v[i * 2 + 1] > out.prob_axial.v[i * 2];
      const bool kc_tg = out.prob_tangential.v[i * 2 + 1] > out.prob_tangential.v[i * 2];
      const Label pred = (kc_ax || kc_tg) ? Label::keratoconus : Label::normal;
      if (pred == chunk[i]->label) ++correct;
    }
  }
  vm.loss = loss_sum / static_cast<double>(samples.size());
  vm.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return vm;
}

std::vector<const SampleRecord*> resolve_ids(const Manifest& manifest,
                                             const std::vector<std::string>& ids) {
  std::vector<const SampleRecord*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&manifest.by_id(id));
  return out;
}

}  // namespace

StageResult run_training(DualHeadModelF& model, const TrainDataset& data,
                         const TrainConfig& config, const ChannelStats& stats,
                         PreprocCache& cache, const std::filesystem::path& out_dir,
                         const std::string& tag) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);

  const Manifest& manifest = *data.manifest;
  const auto train = resolve_ids(manifest, data.train_ids);
  const auto val = resolve_ids(manifest, data.val_ids);
  if (train.empty()) throw std::runtime_error("run_training: empty training set");

  std::vector<Label> train_labels;
  train_labels.reserve(train.size());
  for (const auto* s : train) train_labels.push_back(s->label);
  const ClassWeights weights = class_weights(train_labels);
  const std::vector<double> draw_weights = sampler_weights(train_labels);

  model.apply_freeze(config.freeze);
  auto trainable = model.trainable_parameters();
  SgdOptimizer opt(config.momentum);

  Rng sampler_rng(derive_seed(config.seed, "sampler"));
  Rng aug_rng(derive_seed(config.seed, "augment"));
  Rng mix_rng(derive_seed(config.seed, "mixup"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));

  const int resolution = model.config().input_resolution;
  GeomAugConfig geom = config.geom_aug;
  // exposed pixels take the background colour in normalized space
  for (int c = 0; c < 3; ++c)
    geom.fill[c] = static_cast<float>(
        (0.0 - stats.mu[c]) / std::max(stats.sigma[c], ChannelStats::kSigmaFloor));

  StageResult result;
  std::ofstream log(out_dir / (tag + "_log.tsv"), std::ios::binary);
  log << "epoch\tlr\ttrain_loss\tval_loss\tval_acc\n";

  std::vector<std::pair<std::string, nn::TensorF>> best_state;
  double best_val_acc = -1.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(epoch, config);
    const auto order = weighted_draw(draw_weights, train.size(), sampler_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start < 2) continue;  // batch-norm needs more than one sample
      std::vector<const SampleRecord*> chunk;
      chunk.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) chunk.push_back(train[order[i]]);

      BatchTensors batch = assemble_batch(
          manifest, chunk, stats, cache, config.geom_aug.enabled ? &geom : nullptr,
          config.mixup.enabled ? &config.mixup : nullptr, &aug_rng, &mix_rng, resolution);

      const auto out = model.forward(batch.axial, batch.tangential, true, &dropout_rng);
      const double loss =
          combined_loss(out.prob_axial, out.prob_tangential, batch.targets, weights);
      if (!std::isfinite(loss))
        throw std::runtime_error("run_training: non-finite loss in epoch " +
                                 std::to_string(epoch) + ", batch starting at sample " +
                                 std::to_string(start));
      loss_sum += loss * static_cast<double>(chunk.size());
      seen += chunk.size();

      model.zero_grad();
      model.backward(ce_logit_grad(out.prob_axial, batch.targets, weights),
                     ce_logit_grad(out.prob_tangential, batch.targets, weights));
      opt.step(trainable, lr);
    }
    result.loss_trace.push_back(seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0);

    const ValMetrics vm = validate(model, manifest, val.empty() ? train : val, stats, cache,
                                   weights, config.batch_size, resolution);
    result.val_loss.push_back(vm.loss);
    result.val_accuracy.push_back(vm.accuracy);

    log << epoch << '\t' << lr << '\t' << result.loss_trace.back() << '\t' << vm.loss << '\t'
        << vm.accuracy << '\n';

    if (config.checkpoint_policy == TrainConfig::CheckpointPolicy::best_val &&
        vm.accuracy > best_val_acc) {
      best_val_acc = vm.accuracy;
      best_state.clear();
      for (auto& [name, t] : model.named_state()) best_state.emplace_back(name, *t);
    }
  }

  if (config.checkpoint_policy == TrainConfig::CheckpointPolicy::best_val &&
      !best_state.empty()) {
    auto state = model.named_state();
    for (std::size_t i = 0; i < state.size(); ++i) *state[i].second = best_state[i].second;
  }

  result.checkpoint = out_dir / (tag + ".ckpt");
  CheckpointMeta meta;
  meta.stage = config.stage;
  meta.stats = stats;
  meta.random_init_backbone = result.random_init_backbone;
  save_checkpoint(model, meta, result.checkpoint);

  result.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

StageResult train_stage1(DualHeadModelF& model, const Manifest& bench, const SplitPlan& plan,
                         const TrainConfig& config, const ChannelStats& stats,
                         PreprocCache& cache, const std::filesystem::path& out_dir) {
  if (config.stage != 1) throw std::runtime_error("train_stage1: config.stage must be 1");
  TrainDataset data{&bench, plan.stage1_train, plan.stage1_val};
  return run_training(model, data, config, stats, cache, out_dir, "stage1");
}

StageResult train_stage2(DualHeadModelF& model, const Manifest& handheld, const SplitPlan& plan,
                         const TrainConfig& config, const ChannelStats& stats,
                         PreprocCache& cache, const std::filesystem::path& out_dir) {
  if (config.stage != 2) throw std::runtime_error("train_stage2: config.stage must be 2");
  for (const auto& id : plan.stage2_train)
    for (const auto& other : plan.stage2_test)
      if (id == other)
        throw std::runtime_error("train_stage2: id '" + id + "' is in both train and test");
  TrainDataset data{&handheld, plan.stage2_train, plan.stage2_train};
  return run_training(model, data, config, stats, cache, out_dir, "stage2");
}

}  // namespace kcs
