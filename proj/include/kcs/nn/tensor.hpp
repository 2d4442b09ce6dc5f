#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace kcs::nn {

/// Dense row-major tensor. Shape conventions in this codebase:
/// activations are [N, C, H, W], linear weights [out, in], conv weights
/// [out, in * kh * kw].
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    v.assign(numel(), S(0));
  }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (const int d : shape) n *= d;
    return n;
  }

  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  S* data() { return v.data(); }
  const S* data() const { return v.data(); }

  void zero() { std::fill(v.begin(), v.end(), S(0)); }

  void reshape(std::vector<int> shp) {
    std::int64_t n = 1;
    for (const int d : shp) n *= d;
    if (n != numel()) throw std::runtime_error("reshape: element count mismatch");
    shape = std::move(shp);
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T>(v[i]);
    return out;
  }
};

using TensorF = Tensor<float>;

}  // namespace kcs::nn
