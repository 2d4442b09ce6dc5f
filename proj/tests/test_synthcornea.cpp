#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "kcs/synthcornea.hpp"

using namespace kcs;
namespace fs = std::filesystem;

namespace {

CorneaParams clean_params(double base, double astig, double axis_deg) {
  CorneaParams p;
  p.base_power = base;
  p.astig_magnitude = astig;
  p.astig_axis = axis_deg;
  p.cone_amplitude = 0.0;
  p.noise_sigma = 0.0;
  p.label = Label::normal;
  p.seed = 1;
  return p;
}

GeneratorConfig fast_config() {
  GeneratorConfig cfg;
  cfg.resolution_px = 128;
  return cfg;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kcs_synth_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("sample_cornea_params respects invariants and determinism") {
  GeneratorConfig cfg;
  Rng rng1(7), rng2(7);
  const CorneaParams normal = sample_cornea_params(Label::normal, rng1, cfg);
  CHECK(normal.cone_amplitude == 0.0);
  CHECK(normal.valid());

  const CorneaParams repeat = sample_cornea_params(Label::normal, rng2, cfg);
  CHECK(normal.base_power == repeat.base_power);
  CHECK(normal.astig_axis == repeat.astig_axis);
  CHECK(normal.seed == repeat.seed);

  Rng rng3(7);
  const CorneaParams kc = sample_cornea_params(Label::keratoconus, rng3, cfg);
  CHECK(kc.cone_amplitude >= 5.0);
  CHECK(kc.cone_amplitude <= 25.0);
  CHECK(kc.valid());
}

TEST_CASE("tangential_field constant case") {
  const CurvatureField f = tangential_field(clean_params(44, 0, 0));
  for (const double v : f.values) CHECK(v == doctest::Approx(44.0).epsilon(1e-12));
  CHECK(f.kind == FieldKind::tangential);
}

TEST_CASE("tangential_field astigmatism closed form") {
  const CurvatureField f = tangential_field(clean_params(44, 2, 0));
  // theta = 0 and theta = 90 degrees at any radius
  CHECK(f.at(100, 0) == doctest::Approx(46.0).epsilon(1e-9));
  CHECK(f.at(100, f.n_theta / 4) == doctest::Approx(42.0).epsilon(1e-9));
}

TEST_CASE("tangential_field cone peaks at the cone centre (argmax oracle)") {
  CorneaParams p = clean_params(44, 1, 0);
  p.label = Label::keratoconus;
  p.cone_amplitude = 15.0;
  p.cone_center_r = 1.5;
  p.cone_center_theta = 270.0;
  p.cone_sigma = 1.0;
  const CurvatureField f = tangential_field(p);

  int best_ir = 0, best_it = 0;
  double best = -1e300;
  for (int ir = 0; ir < f.n_r; ++ir)
    for (int it = 0; it < f.n_theta; ++it)
      if (f.at(ir, it) > best) {
        best = f.at(ir, it);
        best_ir = ir;
        best_it = it;
      }
  const double r = f.radius_at(best_ir);
  const double theta = best_it * 2.0 * M_PI / f.n_theta;
  const double cx = 1.5 * std::cos(270.0 * M_PI / 180.0);
  const double cy = 1.5 * std::sin(270.0 * M_PI / 180.0);
  const double dist = std::hypot(r * std::cos(theta) - cx, r * std::sin(theta) - cy);
  CHECK(dist < 0.1);
  // peak value: base + astig(270deg) + cone amplitude; astig cos(2*270deg) = -1...
  // at theta=270, cos(2*(270-0)deg) = cos(540deg) = -1 -> 44 - 1 + 15 = 58
  CHECK(best == doctest::Approx(58.0).epsilon(5e-3));
}

TEST_CASE("axial_from_tangential matches analytic integrals") {
  GeneratorConfig cfg;
  CurvatureField t;
  t.kind = FieldKind::tangential;
  t.n_r = cfg.n_r;
  t.n_theta = 8;
  t.max_radius = cfg.max_radius;
  t.values.resize(static_cast<std::size_t>(t.n_r) * t.n_theta);

  SUBCASE("constant stays constant") {
    for (int ir = 0; ir < t.n_r; ++ir)
      for (int it = 0; it < t.n_theta; ++it) t.at(ir, it) = 44.0;
    const CurvatureField a = axial_from_tangential(t);
    CHECK(a.kind == FieldKind::axial);
    for (const double v : a.values) CHECK(v == doctest::Approx(44.0).epsilon(1e-12));
  }

  SUBCASE("linear 40 + 2r integrates to 40 + r") {
    for (int ir = 0; ir < t.n_r; ++ir)
      for (int it = 0; it < t.n_theta; ++it) t.at(ir, it) = 40.0 + 2.0 * t.radius_at(ir);
    const CurvatureField a = axial_from_tangential(t);
    for (int ir = 1; ir < t.n_r; ++ir) {
      const double expected = 40.0 + a.radius_at(ir);
      CHECK(std::abs(a.at(ir, 3) - expected) / expected < 1e-3);
    }
    CHECK(a.at(0, 0) == doctest::Approx(40.0));
  }

  SUBCASE("quadratic 40 + 3r^2 integrates to 40 + r^2") {
    for (int ir = 0; ir < t.n_r; ++ir)
      for (int it = 0; it < t.n_theta; ++it) {
        const double r = t.radius_at(ir);
        t.at(ir, it) = 40.0 + 3.0 * r * r;
      }
    const CurvatureField a = axial_from_tangential(t);
    for (int ir = 1; ir < t.n_r; ++ir) {
      const double r = a.radius_at(ir);
      const double expected = 40.0 + r * r;
      CHECK(std::abs(a.at(ir, 0) - expected) / expected < 1e-3);
    }
  }

  SUBCASE("quadrature refinement converges") {
    // halving the step should shrink the linear-field error; for the exact
    // trapezoid on linear data both are ~0, so use the quadratic field
    auto build = [](int n_r) {
      CurvatureField f;
      f.kind = FieldKind::tangential;
      f.n_r = n_r;
      f.n_theta = 4;
      f.max_radius = 4.5;
      f.values.resize(static_cast<std::size_t>(n_r) * 4);
      for (int ir = 0; ir < n_r; ++ir)
        for (int it = 0; it < 4; ++it) {
          const double r = f.radius_at(ir);
          f.at(ir, it) = 40.0 + 3.0 * r * r;
        }
      return f;
    };
    auto max_err = [](const CurvatureField& a) {
      double err = 0.0;
      for (int ir = 1; ir < a.n_r; ++ir) {
        const double r = a.radius_at(ir);
        err = std::max(err, std::abs(a.at(ir, 0) - (40.0 + r * r)));
      }
      return err;
    };
    const double coarse = max_err(axial_from_tangential(build(64)));
    const double fine = max_err(axial_from_tangential(build(256)));
    CHECK(fine < coarse);
  }

  SUBCASE("rejects non-tangential input") {
    for (auto& v : t.values) v = 44.0;
    const CurvatureField a = axial_from_tangential(t);
    CHECK_THROWS(axial_from_tangential(a));
  }
}

TEST_CASE("compute_simk") {
  GeneratorConfig cfg;

  SUBCASE("constant field is symmetric") {
    CurvatureField a = axial_from_tangential(tangential_field(clean_params(44, 0, 0)));
    const auto [k1, k2] = compute_simk(a);
    CHECK(k1 == doctest::Approx(44.0).epsilon(1e-6));
    CHECK(k2 == doctest::Approx(44.0).epsilon(1e-6));
  }

  SUBCASE("astigmatic field: ring means 46/42 (brute-force ring scan oracle)") {
    const CurvatureField t = tangential_field(clean_params(44, 2, 0));
    const CurvatureField a = axial_from_tangential(t);
    const auto [k1, k2] = compute_simk(a);
    CHECK(std::abs(k1 - 46.0) < 0.05);
    CHECK(std::abs(k2 - 42.0) < 0.05);

    // oracle: brute-force scan of meridian means on the 1.5 mm ring
    const double dr = a.max_radius / (a.n_r - 1);
    const int ring = static_cast<int>(std::lround(1.5 / dr));
    double best = -1e300;
    for (int j = 0; j < a.n_theta / 2; ++j)
      best = std::max(best, 0.5 * (a.at(ring, j) + a.at(ring, j + a.n_theta / 2)));
    CHECK(k1 == doctest::Approx(best));
  }

  SUBCASE("rotating the astigmatic axis by 30 degrees leaves sim-K unchanged") {
    const CurvatureField a0 = axial_from_tangential(tangential_field(clean_params(44, 2, 0)));
    const CurvatureField a30 = axial_from_tangential(tangential_field(clean_params(44, 2, 30)));
    const auto [k1a, k2a] = compute_simk(a0);
    const auto [k1b, k2b] = compute_simk(a30);
    CHECK(std::abs(k1a - k1b) < 0.05);
    CHECK(std::abs(k2a - k2b) < 0.05);
  }

  SUBCASE("simk1 >= simk2 and small-radius fields rejected") {
    Rng rng(3);
    for (int i = 0; i < 5; ++i) {
      const CorneaParams p = sample_cornea_params(Label::keratoconus, rng);
      const auto [k1, k2] = compute_simk(axial_from_tangential(tangential_field(p)));
      CHECK(k1 >= k2);
    }
    CurvatureField small;
    small.kind = FieldKind::axial;
    small.n_r = 16;
    small.n_theta = 8;
    small.max_radius = 1.0;
    small.values.assign(16 * 8, 44.0);
    CHECK_THROWS(compute_simk(small));
  }
}

TEST_CASE("render_heatmap") {
  const ColorScale scale = ColorScale::clinical_default();
  REQUIRE(scale.bins.size() >= 16);
  for (std::size_t i = 1; i < scale.bins.size(); ++i)
    CHECK(scale.bins[i].lower > scale.bins[i - 1].lower);

  SUBCASE("constant lowest-bin field renders a single colour") {
    const CurvatureField f = [] {
      CurvatureField t = tangential_field(clean_params(44, 0, 0));
      for (auto& v : t.values) v = 30.0;
      return t;
    }();
    const ImageRgb8 img = render_heatmap(f, scale, 96);
    const auto rgb = scale.bins[0].rgb;
    bool saw_disc = false;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const auto* p = img.px(x, y);
        const bool bg = p[0] == kBackgroundColor[0] && p[1] == kBackgroundColor[1] &&
                        p[2] == kBackgroundColor[2];
        if (!bg) {
          saw_disc = true;
          CHECK(p[0] == rgb[0]);
          CHECK(p[1] == rgb[1]);
          CHECK(p[2] == rgb[2]);
        }
      }
    CHECK(saw_disc);
  }

  SUBCASE("two renders are bit-identical") {
    const CurvatureField f = tangential_field(clean_params(45, 1.5, 20));
    const ImageRgb8 a = render_heatmap(f, scale, 128);
    const ImageRgb8 b = render_heatmap(f, scale, 128);
    CHECK(a.pixels == b.pixels);
  }

  SUBCASE("pointwise field dominance gives bin-index dominance (per-pixel oracle)") {
    CurvatureField lo = tangential_field(clean_params(42, 1, 10));
    CurvatureField hi = lo;
    for (auto& v : hi.values) v += 4.0;  // hi >= lo pointwise
    const ImageRgb8 a = render_heatmap(lo, scale, 96);
    const ImageRgb8 b = render_heatmap(hi, scale, 96);
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 96; ++x) {
        const auto* pa = a.px(x, y);
        const auto* pb = b.px(x, y);
        const bool bg = pa[0] == 0 && pa[1] == 0 && pa[2] == 0;
        if (bg) continue;
        // recover bin indices by matching the palette
        int ia = -1, ib = -1;
        for (std::size_t k = 0; k < scale.bins.size(); ++k) {
          if (pa[0] == scale.bins[k].rgb[0] && pa[1] == scale.bins[k].rgb[1] &&
              pa[2] == scale.bins[k].rgb[2])
            ia = static_cast<int>(k);
          if (pb[0] == scale.bins[k].rgb[0] && pb[1] == scale.bins[k].rgb[1] &&
              pb[2] == scale.bins[k].rgb[2])
            ib = static_cast<int>(k);
        }
        REQUIRE(ia >= 0);
        REQUIRE(ib >= 0);
        CHECK(ib >= ia);
      }
  }
}

TEST_CASE("apply_capture_perturbation") {
  const CurvatureField f = tangential_field(clean_params(44, 1, 45));
  const ImageRgb8 img = render_heatmap(f, ColorScale::clinical_default(), 128);

  SUBCASE("bench profile is the identity") {
    Rng rng(11);
    const ImageRgb8 out = apply_capture_perturbation(img, CaptureProfile::bench(), rng);
    CHECK(out.pixels == img.pixels);
  }

  SUBCASE("same seed, same output") {
    Rng a(3), b(3);
    const ImageRgb8 oa = apply_capture_perturbation(img, CaptureProfile::handheld(), a);
    const ImageRgb8 ob = apply_capture_perturbation(img, CaptureProfile::handheld(), b);
    CHECK(oa.pixels == ob.pixels);
  }

  SUBCASE("zoom 0.7 shrinks the disc diameter by 0.7 (disc-mask oracle)") {
    // white disc mask through the same warp path
    ImageRgb8 mask(256, 256, {0, 0, 0});
    const double c = (256 - 1) / 2.0;
    const double radius = 0.47 * 256;
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x)
        if (std::hypot(x - c, y - c) <= radius) {
          auto* p = mask.px(x, y);
          p[0] = p[1] = p[2] = 255;
        }

    CaptureDraw draw;
    draw.zoom = 0.7;
    const ImageRgb8 warped = apply_capture_draw(mask, draw);
    // width of the half-intensity mask along the centre row
    const int row = 127;
    int lo = 256, hi = -1;
    for (int x = 0; x < 256; ++x)
      if (warped.px(x, row)[0] >= 128) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    const double measured = hi - lo + 1;
    const double expected = 2.0 * radius * 0.7;
    CHECK(std::abs(measured - expected) <= 1.0);
  }
}

TEST_CASE("generate_dataset") {
  SUBCASE("empty counts produce an empty manifest and no images") {
    const fs::path dir = temp_dir("empty");
    const Manifest m = generate_dataset(0, 0, CaptureProfile::bench(), dir, 1, fast_config());
    CHECK(m.records.empty());
    CHECK(fs::exists(dir / "manifest.tsv"));
    CHECK(fs::is_empty(dir / "images"));
    const Manifest back = read_manifest(dir / "manifest.tsv");
    CHECK(back.records.empty());
  }

  SUBCASE("counts and labels are honored") {
    const fs::path dir = temp_dir("counts");
    const Manifest m = generate_dataset(10, 5, CaptureProfile::bench(), dir, 1, fast_config());
    REQUIRE(m.records.size() == 15);
    int n_normal = 0;
    for (const auto& r : m.records) n_normal += r.label == Label::normal;
    CHECK(n_normal == 10);
    validate_manifest(m);
    for (const auto& r : m.records) {
      REQUIRE(r.ppk.has_value());
      if (r.label == Label::normal)
        CHECK(*r.ppk < 0.20);
      else
        CHECK(*r.ppk >= 0.45);
      CHECK(r.simk1 >= r.simk2);
      CHECK(r.source == Source::bench);
    }
  }

  SUBCASE("reruns are byte-identical (file-hash oracle)") {
    const fs::path d1 = temp_dir("rerun1");
    const fs::path d2 = temp_dir("rerun2");
    const Manifest m1 = generate_dataset(4, 3, CaptureProfile::handheld(), d1, 9, fast_config());
    generate_dataset(4, 3, CaptureProfile::handheld(), d2, 9, fast_config());
    CHECK(file_bytes(d1 / "manifest.tsv") == file_bytes(d2 / "manifest.tsv"));
    for (const auto& r : m1.records) {
      CHECK(file_bytes(d1 / r.axial_path) == file_bytes(d2 / r.axial_path));
      CHECK(file_bytes(d1 / r.tangential_path) == file_bytes(d2 / r.tangential_path));
    }
  }

  SUBCASE("keratoconus fields carry more mean power than normals (separability)") {
    Rng rng(5);
    const GeneratorConfig cfg;
    CorneaParams pn = sample_cornea_params(Label::normal, rng, cfg);
    CorneaParams pk = pn;
    pk.label = Label::keratoconus;
    pk.cone_amplitude = 12.0;
    const CurvatureField fn = tangential_field(pn, cfg);
    const CurvatureField fk = tangential_field(pk, cfg);
    double mn = 0, mk = 0;
    for (const double v : fn.values) mn += v;
    for (const double v : fk.values) mk += v;
    CHECK(mk > mn);
  }
}
