#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "kcs/dataio.hpp"
#include "kcs/nn/backbone.hpp"

namespace kcs {

/// Backbone stages whose parameters (and batch-norm statistics) stay fixed
/// during training. Stage indices are 1-based; the stem is part of stage 1.
struct FreezeSpec {
  std::set<int> stages;

  static FreezeSpec paper_default() { return {{1, 2, 3}}; }
  static FreezeSpec none() { return {}; }
  bool frozen(int stage_1based) const { return stages.count(stage_1based) > 0; }
};

struct ModelConfig {
  int input_resolution = 512;
  int width_base = 64;
  std::vector<int> blocks = {3, 4, 6, 3};  // residual blocks per stage
  double dropout_p = 0.5;
  std::uint64_t seed = 0;

  /// Full-size profile: ResNet34 topology at 512x512.
  static ModelConfig paper() { return {}; }
  /// Small 4-stage profile for CPU runs: 128x128 input, narrow backbone.
  /// Stage 4 keeps several blocks (as in the full topology) so most of the
  /// trainable capacity sits above the frozen stages.
  static ModelConfig desk() {
    ModelConfig c;
    c.input_resolution = 128;
    c.width_base = 8;
    c.blocks = {1, 1, 1, 3};
    return c;
  }
  /// Truncated single-stage profile for the finite-difference gradient check.
  static ModelConfig tiny() {
    ModelConfig c;
    c.input_resolution = 32;
    c.width_base = 8;
    c.blocks = {1};
    return c;
  }

  int feature_dim() const { return width_base << (blocks.size() - 1); }
  /// (F*128+128) + (128*128+128) + (128*2+2) — the three FC layers of a head.
  std::int64_t head_param_count() const {
    const std::int64_t f = feature_dim();
    return (f * 128 + 128) + (128 * 128 + 128) + (128 * 2 + 2);
  }
};

/// One classification branch: FC-128 / ReLU / dropout, twice, then FC-2.
/// Softmax is applied by the model.
template <typename S>
struct Head {
  nn::Linear<S> fc1, fc2, fc3;
  nn::Dropout<S> drop1, drop2;

  struct Cache {
    nn::Tensor<S> x, a1, d1, a2, d2;
    typename nn::Dropout<S>::Cache drop1_cache, drop2_cache;
  };

  void build(const std::string& name, int feature_dim, double dropout_p, Rng& rng) {
    fc1.build(name + ".fc1", feature_dim, 128, rng);
    fc2.build(name + ".fc2", 128, 128, rng);
    fc3.build(name + ".fc3", 128, 2, rng);
    drop1.p = dropout_p;
    drop2.p = dropout_p;
  }

  nn::Tensor<S> forward(const nn::Tensor<S>& features, Cache& cache, bool training, Rng* rng) {
    cache.x = features;
    nn::Tensor<S> a1 = fc1.forward(features);
    nn::relu_inplace(a1);
    cache.a1 = a1;
    cache.d1 = drop1.forward(a1, cache.drop1_cache, training, rng);
    nn::Tensor<S> a2 = fc2.forward(cache.d1);
    nn::relu_inplace(a2);
    cache.a2 = a2;
    cache.d2 = drop2.forward(a2, cache.drop2_cache, training, rng);
    return fc3.forward(cache.d2);
  }

  /// Returns the gradient w.r.t. the input features.
  nn::Tensor<S> backward(const nn::Tensor<S>& dlogits, Cache& cache) {
    nn::Tensor<S> d = fc3.backward(dlogits, cache.d2, true, true);
    d = drop2.backward(d, cache.drop2_cache);
    d = nn::relu_backward(d, cache.a2);
    d = fc2.backward(d, cache.d1, true, true);
    d = drop1.backward(d, cache.drop1_cache);
    d = nn::relu_backward(d, cache.a1);
    return fc1.backward(d, cache.x, true, true);
  }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    fn(fc1.w);
    fn(fc1.b);
    fn(fc2.w);
    fn(fc2.b);
    fn(fc3.w);
    fn(fc3.b);
  }
};

template <typename S>
struct DualHeadOutput {
  nn::Tensor<S> prob_axial;       // [B, 2] on the simplex
  nn::Tensor<S> prob_tangential;  // [B, 2]
};

/// Shared-backbone two-branch classifier. One parameter set in the backbone
/// serves both forward paths; each map has its own classifier head. Not safe
/// for concurrent mutation — run inference on a copy per thread if needed.
template <typename S>
class DualHeadModel {
public:
  static DualHeadModel build(const ModelConfig& cfg) {
    DualHeadModel m;
    m.cfg_ = cfg;
    Rng rng(derive_seed(cfg.seed, "model-init"));
    m.backbone_.build(3, cfg.width_base, cfg.blocks, rng);
    m.head_axial_.build("head_axial", m.backbone_.feature_dim(), cfg.dropout_p, rng);
    m.head_tangential_.build("head_tangential", m.backbone_.feature_dim(), cfg.dropout_p, rng);
    return m;
  }

  const ModelConfig& config() const { return cfg_; }

  /// Both maps of a batch. `dropout_rng` is required in training mode when
  /// dropout_p > 0. Axial always routes through the axial head.
  DualHeadOutput<S> forward(const nn::Tensor<S>& axial, const nn::Tensor<S>& tangential,
                            bool training, Rng* dropout_rng = nullptr) {
    check_input(axial);
    check_input(tangential);
    training_ = training;
    const nn::Tensor<S> f_ax = backbone_.forward(axial, cache_ax_, training, training);
    const nn::Tensor<S> f_tg = backbone_.forward(tangential, cache_tg_, training, training);
    DualHeadOutput<S> out;
    out.prob_axial = nn::softmax(head_axial_.forward(f_ax, hcache_ax_, training, dropout_rng));
    out.prob_tangential =
        nn::softmax(head_tangential_.forward(f_tg, hcache_tg_, training, dropout_rng));
    return out;
  }

  /// Gradients w.r.t. the two heads' logits (as produced by the loss).
  /// Requires a preceding training-mode forward.
  void backward(const nn::Tensor<S>& dlogits_axial, const nn::Tensor<S>& dlogits_tangential) {
    if (!training_) throw std::runtime_error("backward requires a training-mode forward");
    const nn::Tensor<S> dfeat_ax = head_axial_.backward(dlogits_axial, hcache_ax_);
    const nn::Tensor<S> dfeat_tg = head_tangential_.backward(dlogits_tangential, hcache_tg_);
    const auto trainable = stage_trainable_mask();
    backbone_.backward(dfeat_ax, cache_ax_, trainable);
    backbone_.backward(dfeat_tg, cache_tg_, trainable);
  }

  void zero_grad() {
    for (auto* p : parameters()) p->grad.zero();
  }

  std::vector<nn::Param<S>*> parameters() {
    std::vector<nn::Param<S>*> out;
    backbone_.visit_params([&](nn::Param<S>& p) { out.push_back(&p); });
    head_axial_.visit_params([&](nn::Param<S>& p) { out.push_back(&p); });
    head_tangential_.visit_params([&](nn::Param<S>& p) { out.push_back(&p); });
    return out;
  }

  std::vector<nn::Param<S>*> trainable_parameters() {
    std::vector<nn::Param<S>*> out;
    for (auto* p : parameters())
      if (p->trainable) out.push_back(p);
    return out;
  }

  void apply_freeze(const FreezeSpec& spec) {
    for (const int s : spec.stages)
      if (s < 1 || s > backbone_.num_stages())
        throw std::runtime_error("apply_freeze: stage index out of range: " + std::to_string(s));
    freeze_ = spec;
    for (int s = 1; s <= backbone_.num_stages(); ++s) {
      const bool trainable = !spec.frozen(s);
      backbone_.visit_stage_params(s, [&](nn::Param<S>& p) { p.trainable = trainable; });
    }
  }

  const FreezeSpec& freeze() const { return freeze_; }

  /// Post-ReLU activations of the second FC layer, eval mode. [B, 128]
  nn::Tensor<S> extract_features(const nn::Tensor<S>& input, MapKind head) {
    check_input(input);
    typename nn::Backbone<S>::Cache scratch;
    const nn::Tensor<S> f = backbone_.forward(input, scratch, false, false);
    typename Head<S>::Cache hc;
    Head<S>& h = head == MapKind::axial ? head_axial_ : head_tangential_;
    h.forward(f, hc, false, nullptr);
    return hc.a2;
  }

  /// Every tensor that defines the model state: parameters plus batch-norm
  /// running statistics, in a stable order.
  std::vector<std::pair<std::string, nn::Tensor<S>*>> named_state() {
    std::vector<std::pair<std::string, nn::Tensor<S>*>> out;
    backbone_.visit_params([&](nn::Param<S>& p) { out.emplace_back(p.name, &p.value); });
    backbone_.visit_batchnorms([&](nn::BatchNorm2d<S>& bn) {
      out.emplace_back(bn.stats_prefix() + ".running_mean", &bn.running_mean);
      out.emplace_back(bn.stats_prefix() + ".running_var", &bn.running_var);
    });
    head_axial_.visit_params([&](nn::Param<S>& p) { out.emplace_back(p.name, &p.value); });
    head_tangential_.visit_params([&](nn::Param<S>& p) { out.emplace_back(p.name, &p.value); });
    return out;
  }

  /// Backbone subset of named_state (the part an external weights archive
  /// provides).
  std::vector<std::pair<std::string, nn::Tensor<S>*>> backbone_state() {
    std::vector<std::pair<std::string, nn::Tensor<S>*>> out;
    backbone_.visit_params([&](nn::Param<S>& p) { out.emplace_back(p.name, &p.value); });
    backbone_.visit_batchnorms([&](nn::BatchNorm2d<S>& bn) {
      out.emplace_back(bn.stats_prefix() + ".running_mean", &bn.running_mean);
      out.emplace_back(bn.stats_prefix() + ".running_var", &bn.running_var);
    });
    return out;
  }

  nn::Backbone<S>& backbone() { return backbone_; }
  Head<S>& head(MapKind which) {
    return which == MapKind::axial ? head_axial_ : head_tangential_;
  }

private:
  void check_input(const nn::Tensor<S>& x) const {
    if (x.shape.size() != 4 || x.dim(1) != 3 || x.dim(2) != cfg_.input_resolution ||
        x.dim(3) != cfg_.input_resolution)
      throw std::runtime_error(
          "model input must be [B,3," + std::to_string(cfg_.input_resolution) + "," +
          std::to_string(cfg_.input_resolution) + "]");
  }

  std::vector<bool> stage_trainable_mask() const {
    std::vector<bool> mask(backbone_.num_stages());
    for (int s = 1; s <= backbone_.num_stages(); ++s) mask[s - 1] = !freeze_.frozen(s);
    return mask;
  }

  ModelConfig cfg_;
  nn::Backbone<S> backbone_;
  Head<S> head_axial_, head_tangential_;
  FreezeSpec freeze_;
  bool training_ = false;
  typename nn::Backbone<S>::Cache cache_ax_, cache_tg_;
  typename Head<S>::Cache hcache_ax_, hcache_tg_;
};

using DualHeadModelF = DualHeadModel<float>;

/// Checkpoint sidecar data carried with the tensors. The crop policy rides
/// along so evaluation preprocesses exactly like training did.
struct CheckpointMeta {
  int stage = 0;
  ChannelStats stats;
  bool random_init_backbone = false;
  bool disc_crop = true;
};

/// Binary archive of named tensors with a JSON header holding the model
/// config and meta. Reload rebuilds an identical model (bit-exact forward).
void save_checkpoint(DualHeadModelF& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
struct LoadedCheckpoint {
  DualHeadModelF model;
  CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Writes only the backbone tensors (a pretrained-weights archive).
void save_backbone_archive(DualHeadModelF& model, const std::filesystem::path& path);

/// Replaces the backbone tensors from an archive; heads are untouched.
/// Throws listing every missing or shape-mismatched tensor name.
void load_backbone_weights(DualHeadModelF& model, const std::filesystem::path& archive);

}  // namespace kcs
