#include "kcs/synthcornea.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kcs {

const std::array<std::uint8_t, 3> kBackgroundColor = {0, 0, 0};

namespace {

constexpr double kDeg2Rad = M_PI / 180.0;
constexpr double kClampLo = 20.0;
constexpr double kClampHi = 80.0;

}  // namespace

bool CorneaParams::valid() const {
  const bool cone_ok = label == Label::normal
                           ? cone_amplitude == 0.0
                           : (cone_amplitude >= 5.0 && cone_amplitude <= 25.0);
  return base_power >= 40.0 && base_power <= 48.0 && astig_magnitude >= 0.0 &&
         astig_magnitude <= 3.0 && astig_axis >= 0.0 && astig_axis < 180.0 && cone_ok &&
         cone_sigma >= 0.5 && cone_sigma <= 2.0 && cone_center_r >= 0.5 && cone_center_r <= 2.5;
}

double CurvatureField::sample(double r, double theta_deg) const {
  const double dr = max_radius / (n_r - 1);
  double fr = r / dr;
  fr = std::min(std::max(fr, 0.0), static_cast<double>(n_r - 1));
  const int r0 = std::min(static_cast<int>(fr), n_r - 2);
  const double wr = fr - r0;

  double ft = theta_deg / 360.0 * n_theta;
  ft -= std::floor(ft / n_theta) * n_theta;  // wrap to [0, n_theta)
  const int t0 = static_cast<int>(ft) % n_theta;
  const int t1 = (t0 + 1) % n_theta;
  const double wt = ft - std::floor(ft);

  return (1 - wr) * ((1 - wt) * at(r0, t0) + wt * at(r0, t1)) +
         wr * ((1 - wt) * at(r0 + 1, t0) + wt * at(r0 + 1, t1));
}

int ColorScale::bin_index(double diopters) const {
  const double v = std::min(std::max(diopters, clamp_lo), clamp_hi);
  // last bin whose lower bound does not exceed v
  int idx = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (v >= bins[i].lower) idx = static_cast<int>(i);
  }
  return idx;
}

ColorScale ColorScale::clinical_default() {
  // blue -> cyan -> green -> yellow -> red anchors
  static const std::array<std::array<double, 3>, 5> anchors = {{
      {0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0},
  }};
  ColorScale s;
  s.clamp_lo = 30.0;
  s.clamp_hi = 66.0;
  const int n = 24;
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1) * (anchors.size() - 1);
    const int seg = std::min(static_cast<int>(t), static_cast<int>(anchors.size()) - 2);
    const double f = t - seg;
    std::array<std::uint8_t, 3> rgb;
    for (int c = 0; c < 3; ++c) {
      const double v = (1 - f) * anchors[seg][c] + f * anchors[seg + 1][c];
      rgb[c] = static_cast<std::uint8_t>(std::lround(v));
    }
    s.bins.push_back({30.0 + 1.5 * k, rgb});
  }
  return s;
}

CorneaParams sample_cornea_params(Label label, Rng& rng, const GeneratorConfig& cfg) {
  CorneaParams p;
  p.label = label;
  p.base_power = rng.uniform(40.5, 47.5);
  p.astig_magnitude = rng.uniform(0.0, 3.0);
  p.astig_axis = rng.uniform(0.0, 180.0);
  if (label == Label::keratoconus) {
    p.cone_amplitude = rng.uniform(5.0, 25.0);
    p.cone_center_r = rng.uniform(0.5, 2.5);
    p.cone_center_theta = rng.uniform(cfg.cone_theta_range[0], cfg.cone_theta_range[1]);
    p.cone_sigma = rng.uniform(0.5, 2.0);
  } else {
    p.cone_amplitude = 0.0;
  }
  p.noise_sigma = cfg.noise_sigma;
  p.seed = rng.next_u64();
  return p;
}

CurvatureField tangential_field(const CorneaParams& params, const GeneratorConfig& cfg) {
  CurvatureField f;
  f.kind = FieldKind::tangential;
  f.n_r = cfg.n_r;
  f.n_theta = cfg.n_theta;
  f.max_radius = cfg.max_radius;
  f.values.resize(static_cast<std::size_t>(f.n_r) * f.n_theta);

  Rng noise(derive_seed(params.seed, "field-noise"));
  const double axis_rad = params.astig_axis * kDeg2Rad;
  const double cone_theta_rad = params.cone_center_theta * kDeg2Rad;
  const double cx = params.cone_center_r * std::cos(cone_theta_rad);
  const double cy = params.cone_center_r * std::sin(cone_theta_rad);
  const double two_sigma_sq = 2.0 * params.cone_sigma * params.cone_sigma;

  for (int ir = 0; ir < f.n_r; ++ir) {
    const double r = f.radius_at(ir);
    for (int it = 0; it < f.n_theta; ++it) {
      const double theta = it * 2.0 * M_PI / f.n_theta;
      double v = params.base_power + params.astig_magnitude * std::cos(2.0 * (theta - axis_rad));
      if (params.cone_amplitude > 0.0) {
        const double dx = r * std::cos(theta) - cx;
        const double dy = r * std::sin(theta) - cy;
        v += params.cone_amplitude * std::exp(-(dx * dx + dy * dy) / two_sigma_sq);
      }
      if (params.noise_sigma > 0.0) v += noise.normal(0.0, params.noise_sigma);
      f.at(ir, it) = std::min(std::max(v, kClampLo), kClampHi);
    }
  }
  return f;
}

CurvatureField axial_from_tangential(const CurvatureField& t) {
  if (t.kind != FieldKind::tangential)
    throw std::runtime_error("axial_from_tangential: input field is not tangential");

  CurvatureField a = t;
  a.kind = FieldKind::axial;
  const double dr = t.max_radius / (t.n_r - 1);
  for (int it = 0; it < t.n_theta; ++it) {
    a.at(0, it) = t.at(0, it);  // limit of the running mean at r -> 0
    double integral = 0.0;
    for (int ir = 1; ir < t.n_r; ++ir) {
      integral += 0.5 * (t.at(ir - 1, it) + t.at(ir, it)) * dr;
      a.at(ir, it) = integral / t.radius_at(ir);
    }
  }
  return a;
}

std::pair<double, double> compute_simk(const CurvatureField& axial) {
  if (axial.kind != FieldKind::axial)
    throw std::runtime_error("compute_simk: input field is not axial");
  constexpr double kRingRadius = 1.5;  // mm, the 3 mm zone
  if (axial.max_radius < kRingRadius)
    throw std::runtime_error("compute_simk: field max_radius below the 1.5 mm sim-K ring");

  const double dr = axial.max_radius / (axial.n_r - 1);
  const int ring = static_cast<int>(std::lround(kRingRadius / dr));
  const int half = axial.n_theta / 2;
  const int quarter = axial.n_theta / 4;

  int best = 0;
  double best_power = -1e300;
  for (int j = 0; j < half; ++j) {
    const double m = 0.5 * (axial.at(ring, j) + axial.at(ring, j + half));
    if (m > best_power) {
      best_power = m;
      best = j;
    }
  }
  const int perp_a = (best + quarter) % axial.n_theta;
  const int perp_b = (perp_a + half) % axial.n_theta;
  const double perp_power = 0.5 * (axial.at(ring, perp_a) + axial.at(ring, perp_b));
  return {best_power, perp_power};
}

ImageRgb8 render_heatmap(const CurvatureField& field, const ColorScale& scale, int resolution_px,
                         double disc_radius_frac) {
  if (resolution_px <= 0) throw std::runtime_error("render_heatmap: non-positive resolution");
  ImageRgb8 img(resolution_px, resolution_px, kBackgroundColor);
  const double c = (resolution_px - 1) / 2.0;
  const double disc_px = disc_radius_frac * resolution_px;

  for (int y = 0; y < resolution_px; ++y) {
    for (int x = 0; x < resolution_px; ++x) {
      const double dx = x - c;
      const double dy = y - c;
      const double rr = std::sqrt(dx * dx + dy * dy);
      if (rr > disc_px) continue;
      // image y grows downward; clinical angle grows counter-clockwise
      const double theta = std::atan2(-dy, dx) / kDeg2Rad;
      const double r_mm = rr / disc_px * field.max_radius;
      const auto rgb = scale.color(field.sample(r_mm, theta));
      auto* p = img.px(x, y);
      p[0] = rgb[0];
      p[1] = rgb[1];
      p[2] = rgb[2];
    }
  }
  return img;
}

CaptureDraw CaptureDraw::from(const CaptureProfile& profile, Rng& rng) {
  CaptureDraw d;
  if (!profile.enabled) return d;
  d.zoom = rng.uniform(profile.zoom_range[0], profile.zoom_range[1]);
  d.aspect = rng.uniform(profile.aspect_range[0], profile.aspect_range[1]);
  d.tx = rng.uniform(-profile.translate_max, profile.translate_max);
  d.ty = rng.uniform(-profile.translate_max, profile.translate_max);
  return d;
}

ImageRgb8 apply_capture_draw(const ImageRgb8& image, const CaptureDraw& d) {
  if (d.zoom == 1.0 && d.aspect == 1.0 && d.tx == 0.0 && d.ty == 0.0) return image;
  // aspect splits symmetrically between the axes
  const double sq = std::sqrt(d.aspect);
  const double sx = d.zoom * sq;
  const double sy = d.zoom / sq;
  const double cx = (image.width - 1) / 2.0;
  const double cy = (image.height - 1) / 2.0;
  const Affine m = Affine::centered(cx, cy, sx, sy, 0.0, false, d.tx * image.width,
                                    d.ty * image.height);
  return warp_affine(image, m, kBackgroundColor);
}

ImageRgb8 apply_capture_perturbation(const ImageRgb8& image, const CaptureProfile& profile,
                                     Rng& rng) {
  if (!profile.enabled) return image;
  return apply_capture_draw(image, CaptureDraw::from(profile, rng));
}

Manifest generate_dataset(int n_normal, int n_keratoconus, const CaptureProfile& profile,
                          const std::filesystem::path& out_dir, std::uint64_t seed,
                          const GeneratorConfig& cfg) {
  if (n_normal < 0 || n_keratoconus < 0)
    throw std::runtime_error("generate_dataset: negative sample count");

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw std::runtime_error("generate_dataset: cannot create " + out_dir.string() + ": " +
                                   ec.message());

  const Source source = profile.enabled ? Source::handheld : Source::bench;
  const char* prefix = profile.enabled ? "h" : "b";
  const int total = n_normal + n_keratoconus;

  Manifest manifest;
  manifest.base_dir = out_dir;
  for (int i = 0; i < total; ++i) {
    const Label label = i < n_normal ? Label::normal : Label::keratoconus;
    const std::uint64_t sample_seed = derive_seed(seed, "sample", static_cast<std::uint64_t>(i));
    Rng rng(sample_seed);

    CorneaParams params = sample_cornea_params(label, rng, cfg);
    const CurvatureField tang = tangential_field(params, cfg);
    const CurvatureField axial = axial_from_tangential(tang);
    const auto [simk1, simk2] = compute_simk(axial);

    ImageRgb8 axial_img =
        render_heatmap(axial, cfg.scale, cfg.resolution_px, cfg.disc_radius_frac);
    ImageRgb8 tang_img =
        render_heatmap(tang, cfg.scale, cfg.resolution_px, cfg.disc_radius_frac);
    if (profile.enabled) {
      // one capture pose per eye: both maps come from the same acquisition
      Rng capture_rng(derive_seed(sample_seed, "capture"));
      const CaptureDraw draw = CaptureDraw::from(profile, capture_rng);
      axial_img = apply_capture_draw(axial_img, draw);
      tang_img = apply_capture_draw(tang_img, draw);
    }

    Rng ppk_rng(derive_seed(sample_seed, "ppk"));
    const double ppk = label == Label::keratoconus ? ppk_rng.uniform(0.5, 0.95)
                                                   : ppk_rng.uniform(0.0, 0.15);

    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "%s%04d", prefix, i);
    SampleRecord r;
    r.id = idbuf;
    r.axial_path = std::string("images/") + idbuf + "_axial.png";
    r.tangential_path = std::string("images/") + idbuf + "_tangential.png";
    r.simk1 = simk1;
    r.simk2 = simk2;
    r.ppk = ppk;
    r.label = label;
    r.source = source;
    r.seed = sample_seed;

    write_png(axial_img, manifest.axial_abs(r));
    write_png(tang_img, manifest.tangential_abs(r));
    manifest.records.push_back(std::move(r));
  }

  write_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace kcs
