#include "kcs/augment.hpp"

#include <cmath>
#include <stdexcept>

#include "kcs/image.hpp"

namespace kcs {

GeomDraw GeomDraw::from(const GeomAugConfig& c, Rng& rng) {
  GeomDraw d;
  d.hflip = rng.bernoulli(c.hflip_prob);
  d.rot_deg = rng.uniform(c.rot_deg[0], c.rot_deg[1]);
  d.scale = rng.uniform(c.scale[0], c.scale[1]);
  // magnitude from the configured range, direction random per axis
  d.tx_frac = rng.uniform(c.translate_frac[0], c.translate_frac[1]) *
              (rng.bernoulli(0.5) ? 1.0 : -1.0);
  d.ty_frac = rng.uniform(c.translate_frac[0], c.translate_frac[1]) *
              (rng.bernoulli(0.5) ? 1.0 : -1.0);
  return d;
}

void apply_geom_draw(nn::TensorF& t, const GeomDraw& d, const std::array<float, 3>& fill) {
  if (!d.hflip && d.rot_deg == 0.0 && d.scale == 1.0 && d.tx_frac == 0.0 && d.ty_frac == 0.0)
    return;
  if (t.shape.size() != 3) throw std::runtime_error("apply_geom_draw: expected [C,H,W] tensor");
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  const Affine m = Affine::centered((w - 1) / 2.0, (h - 1) / 2.0, d.scale, d.scale, d.rot_deg,
                                    d.hflip, d.tx_frac * w, d.ty_frac * h);
  nn::TensorF out({c, h, w});
  warp_affine_planar(t.data(), c, h, w, m, fill.data(), out.data());
  t = std::move(out);
}

void geometric_augment(nn::TensorF& axial, nn::TensorF& tangential, const GeomAugConfig& config,
                       Rng& rng) {
  if (!config.enabled) return;
  const GeomDraw d = GeomDraw::from(config, rng);
  apply_geom_draw(axial, d, config.fill);
  apply_geom_draw(tangential, d, config.fill);
}

double draw_lambda(const MixupConfig& config, Rng& rng) {
  if (config.alpha <= 0.0) throw std::runtime_error("draw_lambda: alpha must be positive");
  return rng.beta(config.alpha, config.alpha);
}

void mixup(const nn::TensorF& x_i, const std::array<float, 2>& y_i, const nn::TensorF& x_j,
           const std::array<float, 2>& y_j, double lambda, nn::TensorF* x_out,
           std::array<float, 2>* y_out) {
  if (x_i.shape != x_j.shape) throw std::runtime_error("mixup: tensor shape mismatch");
  if (lambda < 0.0 || lambda > 1.0) throw std::runtime_error("mixup: lambda outside [0,1]");
  if (lambda == 1.0) {
    *x_out = x_i;
    *y_out = y_i;
    return;
  }
  if (lambda == 0.0) {
    *x_out = x_j;
    *y_out = y_j;
    return;
  }
  const float lam = static_cast<float>(lambda);
  const float inv = 1.0f - lam;
  x_out->shape = x_i.shape;
  x_out->v.resize(x_i.v.size());
  for (std::size_t k = 0; k < x_i.v.size(); ++k)
    x_out->v[k] = lam * x_i.v[k] + inv * x_j.v[k];
  (*y_out)[0] = lam * y_i[0] + inv * y_j[0];
  (*y_out)[1] = lam * y_i[1] + inv * y_j[1];
}

}  // namespace kcs
