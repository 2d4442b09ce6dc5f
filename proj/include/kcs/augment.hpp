#pragma once

#include <array>

#include "kcs/nn/tensor.hpp"
#include "kcs/rng.hpp"

namespace kcs {

/// Training-time geometric augmentation ranges. Defaults follow the
/// horizontal-flip / rotation 0-10 degree / scale 0.6-1.4x / translation
/// 1-10% recipe.
struct GeomAugConfig {
  bool enabled = true;
  double hflip_prob = 0.5;
  std::array<double, 2> rot_deg = {0.0, 10.0};
  std::array<double, 2> scale = {0.6, 1.4};
  std::array<double, 2> translate_frac = {0.01, 0.10};
  /// Fill for pixels exposed by the warp; the caller sets this to the
  /// background colour's Z-normalized value.
  std::array<float, 3> fill = {0, 0, 0};

  static GeomAugConfig disabled() {
    GeomAugConfig c;
    c.enabled = false;
    return c;
  }
};

struct MixupConfig {
  bool enabled = true;
  double alpha = 0.2;  // Beta(alpha, alpha) shape

  static MixupConfig disabled() { return {false, 0.2}; }
};

/// One draw of geometric transform parameters.
struct GeomDraw {
  bool hflip = false;
  double rot_deg = 0.0;
  double scale = 1.0;
  double tx_frac = 0.0;  // signed fractions of image size
  double ty_frac = 0.0;

  static GeomDraw from(const GeomAugConfig& config, Rng& rng);
};

/// Applies one transform draw to both maps of a sample; the two heatmaps
/// depict the same eye, so they share the parameters. Tensors are [3,H,W].
void geometric_augment(nn::TensorF& axial, nn::TensorF& tangential, const GeomAugConfig& config,
                       Rng& rng);

/// Applies an explicit draw (used by tests and by the batch loop).
void apply_geom_draw(nn::TensorF& tensor, const GeomDraw& draw, const std::array<float, 3>& fill);

/// lambda ~ Beta(alpha, alpha).
double draw_lambda(const MixupConfig& config, Rng& rng);

/// x_tilde = lambda * x_i + (1 - lambda) * x_j, same for the labels.
/// Endpoints are exact: lambda = 1 returns (x_i, y_i), lambda = 0 (x_j, y_j).
void mixup(const nn::TensorF& x_i, const std::array<float, 2>& y_i, const nn::TensorF& x_j,
           const std::array<float, 2>& y_j, double lambda, nn::TensorF* x_out,
           std::array<float, 2>* y_out);

}  // namespace kcs
