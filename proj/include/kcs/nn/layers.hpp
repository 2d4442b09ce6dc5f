#pragma once

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcs/nn/tensor.hpp"
#include "kcs/rng.hpp"

namespace kcs::nn {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<RowMat<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const RowMat<S>>;

/// A learnable tensor with its gradient and a momentum buffer. `trainable`
/// gates the optimizer and, for batch-norm scale/shift, the statistics mode.
template <typename S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
  Tensor<S> velocity;  // lazily sized by the optimizer
  bool trainable = true;

  void init_shape(std::vector<int> shape) {
    value = Tensor<S>(shape);
    grad = Tensor<S>(std::move(shape));
  }
};

inline int conv_out_dim(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// 2-D convolution, no bias (every conv here feeds a batch norm).
/// Weight layout: [out_c, in_c * k * k].
template <typename S>
struct Conv2d {
  Param<S> w;
  int in_c = 0, out_c = 0, k = 0, stride = 1, pad = 0;

  void build(const std::string& name, int in_channels, int out_channels, int kernel, int stride_,
             int pad_, Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    k = kernel;
    stride = stride_;
    pad = pad_;
    w.name = name + ".w";
    w.init_shape({out_c, in_c * k * k});
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_c) * k * k));
    for (auto& v : w.value.v) v = static_cast<S>(rng.normal(0.0, std_dev));
  }

  Tensor<S> forward(const Tensor<S>& x) {
    const int n = x.dim(0), h = x.dim(2), width = x.dim(3);
    const int oh = conv_out_dim(h, k, stride, pad);
    const int ow = conv_out_dim(width, k, stride, pad);
    Tensor<S> y({n, out_c, oh, ow});
    const int kk = in_c * k * k;
    col_.resize(static_cast<std::size_t>(kk) * oh * ow);
    for (int i = 0; i < n; ++i) {
      im2col(x.data() + static_cast<std::size_t>(i) * in_c * h * width, h, width, oh, ow);
      MatMap<S>(y.data() + static_cast<std::size_t>(i) * out_c * oh * ow, out_c, oh * ow)
          .noalias() = ConstMatMap<S>(w.value.data(), out_c, kk) *
                       ConstMatMap<S>(col_.data(), kk, oh * ow);
    }
    return y;
  }

  /// dy: [N, out_c, OH, OW]; x: the forward input. Accumulates the weight
  /// gradient when `accumulate_grad`, returns dx when `need_dx`.
  Tensor<S> backward(const Tensor<S>& dy, const Tensor<S>& x, bool need_dx,
                     bool accumulate_grad) {
    const int n = x.dim(0), h = x.dim(2), width = x.dim(3);
    const int oh = dy.dim(2), ow = dy.dim(3);
    const int kk = in_c * k * k;
    Tensor<S> dx;
    if (need_dx) dx = Tensor<S>({n, in_c, h, width});
    col_.resize(static_cast<std::size_t>(kk) * oh * ow);
    for (int i = 0; i < n; ++i) {
      const S* dyi = dy.data() + static_cast<std::size_t>(i) * out_c * oh * ow;
      if (accumulate_grad) {
        im2col(x.data() + static_cast<std::size_t>(i) * in_c * h * width, h, width, oh, ow);
        MatMap<S>(w.grad.data(), out_c, kk).noalias() +=
            ConstMatMap<S>(dyi, out_c, oh * ow) *
            ConstMatMap<S>(col_.data(), kk, oh * ow).transpose();
      }
      if (need_dx) {
        MatMap<S>(col_.data(), kk, oh * ow).noalias() =
            ConstMatMap<S>(w.value.data(), out_c, kk).transpose() *
            ConstMatMap<S>(dyi, out_c, oh * ow);
        col2im(dx.data() + static_cast<std::size_t>(i) * in_c * h * width, h, width, oh, ow);
      }
    }
    return dx;
  }

private:
  std::vector<S> col_;  // scratch, reused across samples

  void im2col(const S* x, int h, int w_in, int oh, int ow) {
    const std::size_t plane = static_cast<std::size_t>(h) * w_in;
    S* out = col_.data();
    for (int c = 0; c < in_c; ++c) {
      const S* xc = x + c * plane;
      for (int ki = 0; ki < k; ++ki) {
        for (int kj = 0; kj < k; ++kj) {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= h) {
              for (int ox = 0; ox < ow; ++ox) *out++ = S(0);
              continue;
            }
            const S* row = xc + static_cast<std::size_t>(iy) * w_in;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kj;
              *out++ = (ix < 0 || ix >= w_in) ? S(0) : row[ix];
            }
          }
        }
      }
    }
  }

  void col2im(S* dx, int h, int w_in, int oh, int ow) {
    const std::size_t plane = static_cast<std::size_t>(h) * w_in;
    const S* in = col_.data();
    for (int c = 0; c < in_c; ++c) {
      S* xc = dx + c * plane;
      for (int ki = 0; ki < k; ++ki) {
        for (int kj = 0; kj < k; ++kj) {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= h) {
              in += ow;
              continue;
            }
            S* row = xc + static_cast<std::size_t>(iy) * w_in;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kj;
              if (ix >= 0 && ix < w_in) row[ix] += *in;
              ++in;
            }
          }
        }
      }
    }
  }
};

/// Batch normalization over [N, C, H, W]. When the layer is frozen (gamma
/// not trainable) it behaves as in eval mode: running statistics are used
/// and never updated, so a frozen stage stays bit-identical through training.
template <typename S>
struct BatchNorm2d {
  Param<S> gamma, beta;
  Tensor<S> running_mean, running_var;
  S momentum = S(0.1);
  S eps = S(1e-5);

  struct Cache {
    bool batch_stats = false;
    Tensor<S> xhat;             // only in batch-stats mode
    std::vector<S> invstd;      // per channel
  };

  void build(const std::string& name, int channels) {
    gamma.name = name + ".gamma";
    beta.name = name + ".beta";
    gamma.init_shape({channels});
    beta.init_shape({channels});
    std::fill(gamma.value.v.begin(), gamma.value.v.end(), S(1));
    running_mean = Tensor<S>({channels});
    running_var = Tensor<S>({channels});
    std::fill(running_var.v.begin(), running_var.v.end(), S(1));
  }

  std::string stats_prefix() const {
    return gamma.name.substr(0, gamma.name.size() - 6);  // strip ".gamma"
  }

  Tensor<S> forward(const Tensor<S>& x, Cache& cache, bool training) {
    const int n = x.dim(0), c = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const std::size_t m = static_cast<std::size_t>(n) * plane;
    Tensor<S> y(x.shape);
    cache.batch_stats = training && gamma.trainable;
    cache.invstd.assign(c, S(0));

    if (cache.batch_stats) {
      if (m < 2) throw std::runtime_error("batch norm needs at least 2 values per channel");
      cache.xhat = Tensor<S>(x.shape);
      for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
          const S* p = x.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
          for (std::size_t j = 0; j < plane; ++j) {
            sum += p[j];
            sum_sq += static_cast<double>(p[j]) * p[j];
          }
        }
        const double mean = sum / m;
        const double var = std::max(sum_sq / m - mean * mean, 0.0);
        const S invstd = static_cast<S>(1.0 / std::sqrt(var + eps));
        cache.invstd[ch] = invstd;
        const S g = gamma.value.v[ch], b = beta.value.v[ch], mu = static_cast<S>(mean);
        for (int i = 0; i < n; ++i) {
          const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
          const S* p = x.data() + off;
          S* xh = cache.xhat.data() + off;
          S* py = y.data() + off;
          for (std::size_t j = 0; j < plane; ++j) {
            xh[j] = (p[j] - mu) * invstd;
            py[j] = g * xh[j] + b;
          }
        }
        running_mean.v[ch] =
            (S(1) - momentum) * running_mean.v[ch] + momentum * static_cast<S>(mean);
        const double var_unbiased = var * static_cast<double>(m) / (m - 1);
        running_var.v[ch] =
            (S(1) - momentum) * running_var.v[ch] + momentum * static_cast<S>(var_unbiased);
      }
    } else {
      for (int ch = 0; ch < c; ++ch) {
        const S invstd = static_cast<S>(1.0 / std::sqrt(static_cast<double>(running_var.v[ch]) + eps));
        cache.invstd[ch] = invstd;
        const S g = gamma.value.v[ch], b = beta.value.v[ch], mu = running_mean.v[ch];
        for (int i = 0; i < n; ++i) {
          const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
          const S* p = x.data() + off;
          S* py = y.data() + off;
          for (std::size_t j = 0; j < plane; ++j) py[j] = g * (p[j] - mu) * invstd + b;
        }
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy, Cache& cache, bool accumulate_grad) {
    const int n = dy.dim(0), c = dy.dim(1);
    const std::size_t plane = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
    const std::size_t m = static_cast<std::size_t>(n) * plane;
    Tensor<S> dx(dy.shape);

    for (int ch = 0; ch < c; ++ch) {
      const S g = gamma.value.v[ch];
      const S invstd = cache.invstd[ch];
      if (cache.batch_stats) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
          const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
          const S* pdy = dy.data() + off;
          const S* xh = cache.xhat.data() + off;
          for (std::size_t j = 0; j < plane; ++j) {
            sum_dy += pdy[j];
            sum_dy_xhat += static_cast<double>(pdy[j]) * xh[j];
          }
        }
        if (accumulate_grad) {
          gamma.grad.v[ch] += static_cast<S>(sum_dy_xhat);
          beta.grad.v[ch] += static_cast<S>(sum_dy);
        }
        const S mean_dy = static_cast<S>(sum_dy / m);
        const S mean_dy_xhat = static_cast<S>(sum_dy_xhat / m);
        for (int i = 0; i < n; ++i) {
          const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
          const S* pdy = dy.data() + off;
          const S* xh = cache.xhat.data() + off;
          S* pdx = dx.data() + off;
          for (std::size_t j = 0; j < plane; ++j)
            pdx[j] = g * invstd * (pdy[j] - mean_dy - xh[j] * mean_dy_xhat);
        }
      } else {
        // running-stats mode: a fixed per-channel affine
        const S scale = g * invstd;
        for (int i = 0; i < n; ++i) {
          const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
          const S* pdy = dy.data() + off;
          S* pdx = dx.data() + off;
          for (std::size_t j = 0; j < plane; ++j) pdx[j] = scale * pdy[j];
        }
      }
    }
    return dx;
  }
};

template <typename S>
inline void relu_inplace(Tensor<S>& x) {
  for (auto& v : x.v)
    if (v < S(0)) v = S(0);
}

/// dx = dy where the forward output was positive. `y` is the post-ReLU value.
template <typename S>
inline Tensor<S> relu_backward(const Tensor<S>& dy, const Tensor<S>& y) {
  Tensor<S> dx(dy.shape);
  for (std::size_t i = 0; i < dy.v.size(); ++i) dx.v[i] = y.v[i] > S(0) ? dy.v[i] : S(0);
  return dx;
}

/// 3x3 stride-2 max pool with padding 1 (the ResNet stem pool).
template <typename S>
struct MaxPool2d {
  int k = 3, stride = 2, pad = 1;

  struct Cache {
    std::vector<std::int32_t> argmax;  // flat input index per output element
    std::vector<int> in_shape;
  };

  Tensor<S> forward(const Tensor<S>& x, Cache& cache) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = conv_out_dim(h, k, stride, pad);
    const int ow = conv_out_dim(w, k, stride, pad);
    Tensor<S> y({n, c, oh, ow});
    cache.in_shape = x.shape;
    cache.argmax.assign(y.numel(), 0);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t oi = 0;
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const S* xc = x.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox, ++oi) {
            S best = -std::numeric_limits<S>::infinity();
            std::int32_t best_idx = 0;
            for (int ki = 0; ki < k; ++ki) {
              const int iy = oy * stride - pad + ki;
              if (iy < 0 || iy >= h) continue;
              for (int kj = 0; kj < k; ++kj) {
                const int ix = ox * stride - pad + kj;
                if (ix < 0 || ix >= w) continue;
                const S v = xc[static_cast<std::size_t>(iy) * w + ix];
                if (v > best) {
                  best = v;
                  best_idx = static_cast<std::int32_t>(iy * w + ix);
                }
              }
            }
            y.v[oi] = best;
            cache.argmax[oi] = best_idx;
          }
        }
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy, const Cache& cache) {
    Tensor<S> dx(cache.in_shape);
    const int n = dy.dim(0), c = dy.dim(1);
    const std::size_t out_plane = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
    const std::size_t in_plane =
        static_cast<std::size_t>(cache.in_shape[2]) * cache.in_shape[3];
    std::size_t oi = 0;
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        S* xc = dx.data() + (static_cast<std::size_t>(i) * c + ch) * in_plane;
        for (std::size_t j = 0; j < out_plane; ++j, ++oi) xc[cache.argmax[oi]] += dy.v[oi];
      }
    }
    return dx;
  }
};

/// Global average pooling [N,C,H,W] -> [N,C].
template <typename S>
struct GlobalAvgPool {
  std::vector<int> in_shape;

  Tensor<S> forward(const Tensor<S>& x) {
    in_shape = x.shape;
    const int n = x.dim(0), c = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor<S> y({n, c});
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const S* p = x.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
        double sum = 0.0;
        for (std::size_t j = 0; j < plane; ++j) sum += p[j];
        y.v[static_cast<std::size_t>(i) * c + ch] = static_cast<S>(sum / plane);
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) {
    const int n = dy.dim(0), c = dy.dim(1);
    const std::size_t plane = static_cast<std::size_t>(in_shape[2]) * in_shape[3];
    Tensor<S> dx(in_shape);
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const S g = dy.v[static_cast<std::size_t>(i) * c + ch] / static_cast<S>(plane);
        S* p = dx.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
        for (std::size_t j = 0; j < plane; ++j) p[j] = g;
      }
    }
    return dx;
  }
};

/// Fully connected layer, y = x W^T + b. Weight [out, in].
template <typename S>
struct Linear {
  Param<S> w, b;
  int in_dim = 0, out_dim = 0;

  void build(const std::string& name, int in, int out, Rng& rng) {
    in_dim = in;
    out_dim = out;
    w.name = name + ".w";
    b.name = name + ".b";
    w.init_shape({out, in});
    b.init_shape({out});
    const double std_dev = std::sqrt(2.0 / in);
    for (auto& v : w.value.v) v = static_cast<S>(rng.normal(0.0, std_dev));
  }

  Tensor<S> forward(const Tensor<S>& x) {
    const int n = x.dim(0);
    Tensor<S> y({n, out_dim});
    MatMap<S>(y.data(), n, out_dim).noalias() =
        ConstMatMap<S>(x.data(), n, in_dim) *
        ConstMatMap<S>(w.value.data(), out_dim, in_dim).transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out_dim; ++j) y.v[static_cast<std::size_t>(i) * out_dim + j] += b.value.v[j];
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy, const Tensor<S>& x, bool need_dx,
                     bool accumulate_grad) {
    const int n = dy.dim(0);
    if (accumulate_grad) {
      MatMap<S>(w.grad.data(), out_dim, in_dim).noalias() +=
          ConstMatMap<S>(dy.data(), n, out_dim).transpose() *
          ConstMatMap<S>(x.data(), n, in_dim);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_dim; ++j) b.grad.v[j] += dy.v[static_cast<std::size_t>(i) * out_dim + j];
    }
    Tensor<S> dx;
    if (need_dx) {
      dx = Tensor<S>({n, in_dim});
      MatMap<S>(dx.data(), n, in_dim).noalias() =
          ConstMatMap<S>(dy.data(), n, out_dim) * ConstMatMap<S>(w.value.data(), out_dim, in_dim);
    }
    return dx;
  }
};

/// Inverted dropout. In eval mode (or p = 0) it is the identity.
template <typename S>
struct Dropout {
  double p = 0.5;

  struct Cache {
    std::vector<std::uint8_t> keep;
    bool active = false;
  };

  Tensor<S> forward(const Tensor<S>& x, Cache& cache, bool training, Rng* rng) {
    cache.active = training && p > 0.0;
    if (!cache.active) return x;
    if (!rng) throw std::runtime_error("dropout in training mode needs an rng");
    const S scale = static_cast<S>(1.0 / (1.0 - p));
    Tensor<S> y(x.shape);
    cache.keep.assign(x.v.size(), 0);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      if (!rng->bernoulli(p)) {
        cache.keep[i] = 1;
        y.v[i] = x.v[i] * scale;
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy, const Cache& cache) {
    if (!cache.active) return dy;
    const S scale = static_cast<S>(1.0 / (1.0 - p));
    Tensor<S> dx(dy.shape);
    for (std::size_t i = 0; i < dy.v.size(); ++i)
      dx.v[i] = cache.keep[i] ? dy.v[i] * scale : S(0);
    return dx;
  }
};

/// Row-wise softmax for [N, K].
template <typename S>
inline Tensor<S> softmax(const Tensor<S>& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor<S> p(logits.shape);
  for (int i = 0; i < n; ++i) {
    const S* z = logits.data() + static_cast<std::size_t>(i) * k;
    S* q = p.data() + static_cast<std::size_t>(i) * k;
    S zmax = z[0];
    for (int j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) {
      q[j] = static_cast<S>(std::exp(static_cast<double>(z[j] - zmax)));
      denom += q[j];
    }
    for (int j = 0; j < k; ++j) q[j] = static_cast<S>(q[j] / denom);
  }
  return p;
}

}  // namespace kcs::nn
