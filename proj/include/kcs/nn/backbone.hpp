#pragma once

#include <memory>
#include <optional>

#include "kcs/nn/layers.hpp"

namespace kcs::nn {

/// Two 3x3 convolutions with batch norm and an identity (or 1x1 projected)
/// shortcut — the ResNet basic block.
template <typename S>
struct BasicBlock {
  Conv2d<S> conv1, conv2;
  BatchNorm2d<S> bn1, bn2;
  bool has_down = false;
  Conv2d<S> down_conv;
  BatchNorm2d<S> down_bn;

  struct Cache {
    Tensor<S> x_in;
    typename BatchNorm2d<S>::Cache bn1_cache, bn2_cache, down_cache;
    Tensor<S> y1;     // after first relu
    Tensor<S> y_out;  // block output, post-relu
  };

  void build(const std::string& name, int in_c, int out_c, int stride, Rng& rng) {
    conv1.build(name + ".conv1", in_c, out_c, 3, stride, 1, rng);
    bn1.build(name + ".bn1", out_c);
    conv2.build(name + ".conv2", out_c, out_c, 3, 1, 1, rng);
    bn2.build(name + ".bn2", out_c);
    has_down = stride != 1 || in_c != out_c;
    if (has_down) {
      down_conv.build(name + ".down.conv", in_c, out_c, 1, stride, 0, rng);
      down_bn.build(name + ".down.bn", out_c);
    }
  }

  Tensor<S> forward(const Tensor<S>& x, Cache& cache, bool training, bool keep_cache) {
    if (keep_cache) cache.x_in = x;
    Tensor<S> y = bn1.forward(conv1.forward(x), cache.bn1_cache, training);
    relu_inplace(y);
    if (keep_cache) cache.y1 = y;
    Tensor<S> z = bn2.forward(conv2.forward(y), cache.bn2_cache, training);
    Tensor<S> sc = has_down
                       ? down_bn.forward(down_conv.forward(x), cache.down_cache, training)
                       : x;
    for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] += sc.v[i];
    relu_inplace(z);
    if (keep_cache) cache.y_out = z;
    return z;
  }

  Tensor<S> backward(const Tensor<S>& dy, Cache& cache, bool need_dx, bool accumulate_grad) {
    Tensor<S> d_out = relu_backward(dy, cache.y_out);
    // main branch
    Tensor<S> d = bn2.backward(d_out, cache.bn2_cache, accumulate_grad);
    d = conv2.backward(d, cache.y1, true, accumulate_grad);
    d = relu_backward(d, cache.y1);
    d = bn1.backward(d, cache.bn1_cache, accumulate_grad);
    Tensor<S> dx = conv1.backward(d, cache.x_in, need_dx, accumulate_grad);
    // shortcut branch adds into dx
    if (has_down) {
      Tensor<S> ds = down_bn.backward(d_out, cache.down_cache, accumulate_grad);
      ds = down_conv.backward(ds, cache.x_in, need_dx, accumulate_grad);
      if (need_dx)
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += ds.v[i];
    } else if (need_dx) {
      for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += d_out.v[i];
    }
    return dx;
  }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    fn(conv1.w);
    fn(bn1.gamma);
    fn(bn1.beta);
    fn(conv2.w);
    fn(bn2.gamma);
    fn(bn2.beta);
    if (has_down) {
      fn(down_conv.w);
      fn(down_bn.gamma);
      fn(down_bn.beta);
    }
  }

  template <typename Fn>
  void visit_batchnorms(Fn&& fn) {
    fn(bn1);
    fn(bn2);
    if (has_down) fn(down_bn);
  }
};

/// ResNet-style feature extractor: 7x7 stem, max pool, then residual stages
/// that double the width and halve the resolution. Stage indices are
/// 1-based; the stem freezes together with stage 1.
template <typename S>
struct Backbone {
  Conv2d<S> stem_conv;
  BatchNorm2d<S> stem_bn;
  MaxPool2d<S> stem_pool;
  std::vector<std::vector<BasicBlock<S>>> stages;
  GlobalAvgPool<S> gap;

  struct Cache {
    Tensor<S> x_in;
    typename BatchNorm2d<S>::Cache stem_bn_cache;
    Tensor<S> stem_relu;  // post-relu, pre-pool
    typename MaxPool2d<S>::Cache pool_cache;
    Tensor<S> pool_out;
    std::vector<std::vector<typename BasicBlock<S>::Cache>> block_caches;
    Tensor<S> features;  // post-GAP [N, F]
  };

  void build(int in_channels, int width_base, const std::vector<int>& blocks, Rng& rng) {
    stem_conv.build("backbone.stem.conv", in_channels, width_base, 7, 2, 3, rng);
    stem_bn.build("backbone.stem.bn", width_base);
    stages.clear();
    int in_c = width_base;
    for (std::size_t s = 0; s < blocks.size(); ++s) {
      const int out_c = width_base << s;
      std::vector<BasicBlock<S>> stage(blocks[s]);
      for (int b = 0; b < blocks[s]; ++b) {
        const int stride = (s > 0 && b == 0) ? 2 : 1;
        const std::string name =
            "backbone.s" + std::to_string(s + 1) + ".b" + std::to_string(b);
        stage[b].build(name, b == 0 ? in_c : out_c, out_c, b == 0 ? stride : 1, rng);
      }
      in_c = out_c;
      stages.push_back(std::move(stage));
    }
  }

  int feature_dim() const { return stem_conv.out_c << (stages.size() - 1); }
  int num_stages() const { return static_cast<int>(stages.size()); }

  /// keep_cache = false skips all activation storage (inference).
  Tensor<S> forward(const Tensor<S>& x, Cache& cache, bool training, bool keep_cache) {
    if (keep_cache) cache.x_in = x;
    Tensor<S> y = stem_bn.forward(stem_conv.forward(x), cache.stem_bn_cache, training);
    relu_inplace(y);
    if (keep_cache) cache.stem_relu = y;
    y = stem_pool.forward(y, cache.pool_cache);
    if (keep_cache) {
      cache.pool_out = y;
      cache.block_caches.assign(stages.size(), {});
    }
    for (std::size_t s = 0; s < stages.size(); ++s) {
      if (keep_cache) cache.block_caches[s].resize(stages[s].size());
      for (std::size_t b = 0; b < stages[s].size(); ++b) {
        typename BasicBlock<S>::Cache dummy;
        y = stages[s][b].forward(y, keep_cache ? cache.block_caches[s][b] : dummy, training,
                                 keep_cache);
      }
    }
    Tensor<S> f = gap.forward(y);
    if (keep_cache) cache.features = f;
    return f;
  }

  /// d_features: [N, F]. Stage s gets parameter gradients only when
  /// stage_trainable[s] (0-based); the walk stops below the deepest
  /// trainable stage since nothing beneath needs a gradient.
  void backward(const Tensor<S>& d_features, Cache& cache,
                const std::vector<bool>& stage_trainable) {
    int lowest = num_stages();  // 0-based index of the lowest trainable stage
    for (int s = 0; s < num_stages(); ++s) {
      if (stage_trainable[s]) {
        lowest = s;
        break;
      }
    }
    if (lowest == num_stages()) return;  // everything frozen

    Tensor<S> d = gap.backward(d_features);
    for (int s = num_stages() - 1; s >= lowest; --s) {
      const bool acc = stage_trainable[s];
      for (int b = static_cast<int>(stages[s].size()) - 1; b >= 0; --b) {
        // when lowest > 0 the walk ends at (lowest, 0); when the stem is
        // trainable it continues below stage 1's first block
        const bool need_dx = !(s == lowest && b == 0 && lowest > 0);
        d = stages[s][b].backward(d, cache.block_caches[s][b], need_dx, acc);
      }
    }
    if (lowest == 0) {
      // through the stem (stage 1 trainable)
      d = stem_pool.backward(d, cache.pool_cache);
      d = relu_backward(d, cache.stem_relu);
      d = stem_bn.backward(d, cache.stem_bn_cache, true);
      stem_conv.backward(d, cache.x_in, false, true);
    }
  }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    fn(stem_conv.w);
    fn(stem_bn.gamma);
    fn(stem_bn.beta);
    for (auto& stage : stages)
      for (auto& block : stage) block.visit_params(fn);
  }

  /// Visit params of one 1-based stage (stage 1 includes the stem).
  template <typename Fn>
  void visit_stage_params(int stage_1based, Fn&& fn) {
    if (stage_1based == 1) {
      fn(stem_conv.w);
      fn(stem_bn.gamma);
      fn(stem_bn.beta);
    }
    for (auto& block : stages[static_cast<std::size_t>(stage_1based - 1)])
      block.visit_params(fn);
  }

  template <typename Fn>
  void visit_batchnorms(Fn&& fn) {
    fn(stem_bn);
    for (auto& stage : stages)
      for (auto& block : stage) block.visit_batchnorms(fn);
  }
};

}  // namespace kcs::nn
