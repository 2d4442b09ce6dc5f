#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kcs/image.hpp"
#include "kcs/manifest.hpp"
#include "kcs/rng.hpp"

namespace kcs {

/// Parametric description of one synthetic cornea. Power values in diopters,
/// lengths in millimetres, angles in degrees.
struct CorneaParams {
  double base_power = 44.0;        // [40, 48]
  double astig_magnitude = 0.0;    // [0, 3]
  double astig_axis = 0.0;         // [0, 180)
  double cone_amplitude = 0.0;     // 0 for normal, [5, 25] for keratoconus
  double cone_center_r = 1.5;      // [0.5, 2.5]
  double cone_center_theta = 270.0;
  double cone_sigma = 1.0;         // [0.5, 2.0]
  double noise_sigma = 0.3;
  Label label = Label::normal;
  std::uint64_t seed = 0;

  bool valid() const;
};

enum class FieldKind { tangential, axial };

/// Polar grid of corneal refractive power. values[i * n_theta + j] holds the
/// power at radius i * (max_radius / (n_r - 1)) mm and angle j * (360 / n_theta)
/// degrees. Angle 0 is nasal-temporal (image right), increasing counter-
/// clockwise; 270 degrees points to the inferior cornea (image bottom).
struct CurvatureField {
  FieldKind kind = FieldKind::tangential;
  int n_r = 256;
  int n_theta = 256;
  double max_radius = 4.5;  // mm
  std::vector<double> values;

  double& at(int ir, int itheta) { return values[static_cast<std::size_t>(ir) * n_theta + itheta]; }
  double at(int ir, int itheta) const {
    return values[static_cast<std::size_t>(ir) * n_theta + itheta];
  }
  double radius_at(int ir) const { return ir * max_radius / (n_r - 1); }
  /// Bilinear sample at (r mm, theta degrees), clamped in r, wrapped in theta.
  double sample(double r, double theta_deg) const;
};

/// Piecewise-constant diopter -> colour map.
struct ColorScale {
  struct Bin {
    double lower;  // diopters
    std::array<std::uint8_t, 3> rgb;
  };
  std::vector<Bin> bins;  // lower bounds strictly increasing
  double clamp_lo = 30.0;
  double clamp_hi = 66.0;

  int bin_index(double diopters) const;
  std::array<std::uint8_t, 3> color(double diopters) const { return bins[bin_index(diopters)].rgb; }

  /// 24 bins of 1.5 D starting at 30 D, colours interpolated through
  /// blue-cyan-green-yellow-red. Mimics a clinical absolute scale.
  static ColorScale clinical_default();
};

/// Geometric jitter applied at "capture" time. The bench profile is the
/// identity; the handheld profile models a phone-held topographer.
struct CaptureProfile {
  bool enabled = false;
  std::array<double, 2> zoom_range = {1.0, 1.0};
  double translate_max = 0.0;  // fraction of image size, per axis
  std::array<double, 2> aspect_range = {1.0, 1.0};

  static CaptureProfile bench() { return {}; }
  /// Handheld capture sits farther from the eye than the bench rest, so the
  /// zoom jitter is biased to zoom-out.
  static CaptureProfile handheld() {
    return {true, {0.7, 1.0}, 0.08, {0.9, 1.1}};
  }
};

struct GeneratorConfig {
  int n_r = 256;
  int n_theta = 256;
  double max_radius = 4.5;
  int resolution_px = 512;
  double disc_radius_frac = 0.47;  // disc radius as a fraction of image size
  std::array<double, 2> cone_theta_range = {200.0, 340.0};  // inferior bias
  double noise_sigma = 0.3;
  ColorScale scale = ColorScale::clinical_default();
};

extern const std::array<std::uint8_t, 3> kBackgroundColor;

CorneaParams sample_cornea_params(Label label, Rng& rng, const GeneratorConfig& cfg = {});

/// K_t(r,theta) = base + astig * cos(2(theta - axis)) + cone bump + noise,
/// clamped to [20, 80] D. Noise is drawn from the params' own seed so the
/// field is a pure function of params.
CurvatureField tangential_field(const CorneaParams& params, const GeneratorConfig& cfg = {});

/// Radial running mean K_a(r) = (1/r) * integral_0^r K_t(s) ds per meridian,
/// by cumulative trapezoidal quadrature; K_a(0) = K_t(0).
CurvatureField axial_from_tangential(const CurvatureField& tangential);

/// Steepest and flattest meridian powers on the 1.5 mm ring of an axial map.
/// A meridian averages the samples at theta and theta + 180. simk1 is the
/// maximum meridian power, simk2 the power of the perpendicular meridian.
std::pair<double, double> compute_simk(const CurvatureField& axial);

/// Colour-coded heatmap: square RGB image, corneal disc centred, pixels
/// outside the disc filled with the background colour.
ImageRgb8 render_heatmap(const CurvatureField& field, const ColorScale& scale, int resolution_px,
                         double disc_radius_frac = 0.47);

/// One zoom/translate/aspect draw from the profile, applied as an affine
/// warp about the image centre. Bench profile returns the input unchanged.
ImageRgb8 apply_capture_perturbation(const ImageRgb8& image, const CaptureProfile& profile,
                                     Rng& rng);

/// Worker-safe parameter draw for apply_capture_perturbation; exposed so a
/// sample's two heatmaps can share one draw.
struct CaptureDraw {
  double zoom = 1.0, aspect = 1.0, tx = 0.0, ty = 0.0;
  static CaptureDraw from(const CaptureProfile& profile, Rng& rng);
};
ImageRgb8 apply_capture_draw(const ImageRgb8& image, const CaptureDraw& draw);

/// Generates n_normal + n_keratoconus samples, writes axial/tangential PNGs
/// and a manifest under out_dir, and returns the manifest. Deterministic in
/// (counts, profile, seed). Each sample derives its own seed, so generation
/// could be farmed out per sample; the manifest itself is assembled by this
/// single writer.
Manifest generate_dataset(int n_normal, int n_keratoconus, const CaptureProfile& profile,
                          const std::filesystem::path& out_dir, std::uint64_t seed,
                          const GeneratorConfig& cfg = {});

}  // namespace kcs
