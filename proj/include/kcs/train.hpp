#pragma once

#include <filesystem>
#include <vector>

#include "kcs/augment.hpp"
#include "kcs/dataio.hpp"
#include "kcs/model.hpp"

namespace kcs {

/// Per-class loss weights, inversely proportional to the training counts and
/// normalized so the pair sums to 2.
struct ClassWeights {
  double w_normal = 1.0;
  double w_keratoconus = 1.0;

  double of(Label label) const { return label == Label::normal ? w_normal : w_keratoconus; }
};

ClassWeights class_weights(std::size_t n_normal, std::size_t n_keratoconus);
ClassWeights class_weights(const std::vector<Label>& train_labels);

/// Hyperparameters of one fine-tuning stage. Stage defaults follow the
/// training recipe: stage 1 runs 200 epochs at a fixed 1e-3, stage 2 runs
/// 100 epochs from 1e-4 with linear decay; SGD momentum 0.9, batch 32,
/// backbone stages 1-3 frozen throughout.
struct TrainConfig {
  int stage = 1;
  double lr_init = 1e-3;
  int epochs = 200;
  double momentum = 0.9;
  int batch_size = 32;
  FreezeSpec freeze = FreezeSpec::paper_default();
  GeomAugConfig geom_aug;
  MixupConfig mixup;
  std::uint64_t seed = 0;
  enum class CheckpointPolicy { best_val, last };
  CheckpointPolicy checkpoint_policy = CheckpointPolicy::best_val;

  static TrainConfig stage1_defaults() {
    TrainConfig c;
    c.stage = 1;
    c.lr_init = 1e-3;
    c.epochs = 200;
    return c;
  }
  static TrainConfig stage2_defaults() {
    TrainConfig c;
    c.stage = 2;
    c.lr_init = 1e-4;
    c.epochs = 100;
    return c;
  }
  /// CPU-friendly budget. Stage 1 shrinks 200 -> 30 epochs; stage 2 keeps
  /// its 100 epochs — the stage-2 set is tiny (~2 batches per epoch) and
  /// the adaptation needs the full step count.
  void apply_desk_scale() {
    if (stage == 1) epochs = 30;
  }
};

/// Stage 1: constant lr_init. Stage 2: lr_init * (1 - epoch / epochs).
double lr_at(int epoch, const TrainConfig& config);

/// Mean over the batch of -sum_c weight_c * target_c * log(prob_c), with the
/// probabilities clamped at 1e-7. Targets may be soft (mixup).
template <typename S>
double weighted_ce(const nn::Tensor<S>& probs, const nn::Tensor<S>& targets,
                   const ClassWeights& weights);

/// Sum of the two heads' weighted_ce values.
template <typename S>
double combined_loss(const nn::Tensor<S>& prob_axial, const nn::Tensor<S>& prob_tangential,
                     const nn::Tensor<S>& targets, const ClassWeights& weights);

/// Gradient of weighted_ce w.r.t. the head's logits:
/// (prob * <w, t> - w .* t) / batch. Matches the unclamped loss.
template <typename S>
nn::Tensor<S> ce_logit_grad(const nn::Tensor<S>& probs, const nn::Tensor<S>& targets,
                            const ClassWeights& weights);

/// SGD with momentum over the trainable parameters only.
class SgdOptimizer {
public:
  explicit SgdOptimizer(double momentum) : momentum_(momentum) {}
  void step(std::vector<nn::Param<float>*>& trainable, double lr);

private:
  double momentum_;
};

struct StageResult {
  std::filesystem::path checkpoint;
  std::vector<double> loss_trace;    // per-epoch mean training loss
  std::vector<double> val_loss;      // per-epoch, augmentation and mixup off
  std::vector<double> val_accuracy;  // OR-rule accuracy on the val ids
  double wall_time_sec = 0.0;
  bool random_init_backbone = false;
};

struct TrainDataset {
  const Manifest* manifest = nullptr;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

/// The full loop: weighted class-balanced sampling, geometric augmentation,
/// mixup, dual forward, combined weighted cross-entropy, SGD. Deterministic
/// in config.seed. Writes the checkpoint and a per-epoch log (epoch, lr,
/// train_loss, val_loss, val_acc) under out_dir.
StageResult run_training(DualHeadModelF& model, const TrainDataset& data,
                         const TrainConfig& config, const ChannelStats& stats,
                         PreprocCache& cache, const std::filesystem::path& out_dir,
                         const std::string& tag);

/// Stage-1 wrapper: bench data, stage-1 split.
StageResult train_stage1(DualHeadModelF& model, const Manifest& bench, const SplitPlan& plan,
                         const TrainConfig& config, const ChannelStats& stats,
                         PreprocCache& cache, const std::filesystem::path& out_dir);

/// Stage-2 wrapper: handheld data. Refuses id overlap between the stage-2
/// train and test lists; the test ids are never read. Validation metrics are
/// computed on the stage-2 train ids (there is no held-out stage-2 val set).
StageResult train_stage2(DualHeadModelF& model, const Manifest& handheld, const SplitPlan& plan,
                         const TrainConfig& config, const ChannelStats& stats,
                         PreprocCache& cache, const std::filesystem::path& out_dir);

}  // namespace kcs
