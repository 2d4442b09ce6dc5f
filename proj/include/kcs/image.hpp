#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace kcs {

/// Interleaved 8-bit RGB image.
struct ImageRgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // size = 3 * width * height

  ImageRgb8() = default;
  ImageRgb8(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0});

  std::uint8_t* px(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* px(int x, int y) const {
    return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
};

/// 2x3 affine matrix mapping destination pixel coordinates to source
/// coordinates: src = [a b; d e] * dst + [c; f].
struct Affine {
  double a = 1, b = 0, c = 0;
  double d = 0, e = 1, f = 0;

  /// this(other(x)) — apply `other` first, then this.
  Affine compose(const Affine& other) const;
  static Affine identity() { return {}; }
  /// Scale/rotate/flip/translate about the image centre, expressed as the
  /// inverse (dst->src) map. Angles in degrees, counter-clockwise in image
  /// terms; translation in destination pixels.
  static Affine centered(double cx, double cy, double scale_x, double scale_y,
                         double rot_deg, bool hflip, double tx, double ty);
};

ImageRgb8 read_png(const std::filesystem::path& path);
void write_png(const ImageRgb8& image, const std::filesystem::path& path);

/// Bilinear resize, rounded back to 8 bits.
ImageRgb8 resize_bilinear(const ImageRgb8& src, int out_w, int out_h);

/// Bilinear inverse-map warp; destination pixels whose source falls outside
/// the image get `fill`.
ImageRgb8 warp_affine(const ImageRgb8& src, const Affine& dst_to_src,
                      std::array<std::uint8_t, 3> fill = {0, 0, 0});

/// Same warp on a planar float C×H×W buffer with per-channel fill.
void warp_affine_planar(const float* src, int channels, int height, int width,
                        const Affine& dst_to_src, const float* fill, float* dst);

ImageRgb8 crop(const ImageRgb8& src, int x0, int y0, int w, int h);

}  // namespace kcs
