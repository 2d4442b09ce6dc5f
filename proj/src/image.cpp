#include "kcs/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>

namespace kcs {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageRgb8::ImageRgb8(int w, int h, std::array<std::uint8_t, 3> fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(3) * w * h) {
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill[0];
    pixels[i + 1] = fill[1];
    pixels[i + 2] = fill[2];
  }
}

Affine Affine::compose(const Affine& o) const {
  Affine r;
  r.a = a * o.a + b * o.d;
  r.b = a * o.b + b * o.e;
  r.c = a * o.c + b * o.f + c;
  r.d = d * o.a + e * o.d;
  r.e = d * o.b + e * o.e;
  r.f = d * o.c + e * o.f + f;
  return r;
}

Affine Affine::centered(double cx, double cy, double scale_x, double scale_y,
                        double rot_deg, bool hflip, double tx, double ty) {
  // Forward map: translate to origin, flip, scale, rotate, translate back,
  // then shift by (tx, ty). The warp needs the inverse, built directly:
  // undo shift, undo rotation, undo scale, undo flip.
  const double th = rot_deg * M_PI / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  Affine inv;
  const double fx = hflip ? -1.0 : 1.0;
  // dst -> centered coords
  // p = dst - c - t; q = R(-th) p; s = q / scale; src = F(s) + c
  inv.a = fx * ct / scale_x;
  inv.b = fx * st / scale_x;
  inv.d = -st / scale_y;
  inv.e = ct / scale_y;
  const double ox = -(cx + tx), oy = -(cy + ty);
  inv.c = inv.a * ox + inv.b * oy + cx;
  inv.f = inv.d * ox + inv.e * oy + cy;
  return inv;
}

ImageRgb8 read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail("cannot open PNG for reading: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("PNG decode error: " + path.string());
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  ImageRgb8 img(static_cast<int>(w), static_cast<int>(h));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + 3 * static_cast<std::size_t>(w) * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const ImageRgb8& image, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) fail("cannot open PNG for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("PNG encode error: " + path.string());
  }

  png_init_io(png, fp.get());
  // fixed encoder settings keep reruns byte-identical
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y)
    rows[y] = const_cast<png_bytep>(image.pixels.data() + 3 * static_cast<std::size_t>(image.width) * y);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

inline void sample_bilinear_rgb(const ImageRgb8& src, double sx, double sy,
                                const std::array<std::uint8_t, 3>& fill, std::uint8_t* out) {
  if (sx < -0.5 || sy < -0.5 || sx > src.width - 0.5 || sy > src.height - 0.5) {
    out[0] = fill[0];
    out[1] = fill[1];
    out[2] = fill[2];
    return;
  }
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0, fy = sy - y0;
  const auto at = [&](int x, int y, int c) -> double {
    x = std::min(std::max(x, 0), src.width - 1);
    y = std::min(std::max(y, 0), src.height - 1);
    return src.px(x, y)[c];
  };
  for (int c = 0; c < 3; ++c) {
    const double v = (1 - fx) * (1 - fy) * at(x0, y0, c) + fx * (1 - fy) * at(x0 + 1, y0, c) +
                     (1 - fx) * fy * at(x0, y0 + 1, c) + fx * fy * at(x0 + 1, y0 + 1, c);
    out[c] = static_cast<std::uint8_t>(std::lround(std::min(std::max(v, 0.0), 255.0)));
  }
}

}  // namespace

ImageRgb8 resize_bilinear(const ImageRgb8& src, int out_w, int out_h) {
  ImageRgb8 dst(out_w, out_h);
  const double sx = static_cast<double>(src.width) / out_w;
  const double sy = static_cast<double>(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const double u = (x + 0.5) * sx - 0.5;
      const double v = (y + 0.5) * sy - 0.5;
      sample_bilinear_rgb(src, u, v, {0, 0, 0}, dst.px(x, y));
    }
  }
  return dst;
}

ImageRgb8 warp_affine(const ImageRgb8& src, const Affine& m, std::array<std::uint8_t, 3> fill) {
  ImageRgb8 dst(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const double sx = m.a * x + m.b * y + m.c;
      const double sy = m.d * x + m.e * y + m.f;
      sample_bilinear_rgb(src, sx, sy, fill, dst.px(x, y));
    }
  }
  return dst;
}

void warp_affine_planar(const float* src, int channels, int height, int width,
                        const Affine& m, const float* fill, float* dst) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double sx = m.a * x + m.b * y + m.c;
      const double sy = m.d * x + m.e * y + m.f;
      const std::size_t di = static_cast<std::size_t>(y) * width + x;
      if (sx < -0.5 || sy < -0.5 || sx > width - 0.5 || sy > height - 0.5) {
        for (int c = 0; c < channels; ++c) dst[c * plane + di] = fill[c];
        continue;
      }
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      const int xa = std::min(std::max(x0, 0), width - 1);
      const int xb = std::min(std::max(x0 + 1, 0), width - 1);
      const int ya = std::min(std::max(y0, 0), height - 1);
      const int yb = std::min(std::max(y0 + 1, 0), height - 1);
      for (int c = 0; c < channels; ++c) {
        const float* p = src + c * plane;
        const double v = (1 - fx) * (1 - fy) * p[static_cast<std::size_t>(ya) * width + xa] +
                         fx * (1 - fy) * p[static_cast<std::size_t>(ya) * width + xb] +
                         (1 - fx) * fy * p[static_cast<std::size_t>(yb) * width + xa] +
                         fx * fy * p[static_cast<std::size_t>(yb) * width + xb];
        dst[c * plane + di] = static_cast<float>(v);
      }
    }
  }
}

ImageRgb8 crop(const ImageRgb8& src, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > src.width || y0 + h > src.height || w <= 0 || h <= 0)
    fail("crop rectangle out of bounds");
  ImageRgb8 dst(w, h);
  for (int y = 0; y < h; ++y)
    std::memcpy(dst.px(0, y), src.px(x0, y0 + y), static_cast<std::size_t>(3) * w);
  return dst;
}

}  // namespace kcs
