#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "carotid/volumetry.hpp"
#include "fixtures.hpp"

using namespace carotid;

namespace {

Contour ellipse_contour(double a, double b, int n) {
  Contour c;
  for (int i = 0; i < n; ++i) {
    const double t = 2 * std::numbers::pi * i / n;
    c.points.push_back({a * std::cos(t), b * std::sin(t)});
  }
  return c;
}

std::vector<LabelPair> ring_stack(int n, double r_mab, double r_lib) {
  std::vector<LabelPair> s;
  for (int i = 0; i < n; ++i) s.push_back(fixtures::annulus(64, 64, 31.5, 31.5, r_mab, r_lib, i));
  return s;
}

// Rotates a square mask by 90 degrees and shifts it by integer offsets.
Mask rigid(const Mask& m, int dr, int dc) {
  Mask out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      const int rr = c + dr, cc = m.rows() - 1 - r + dc;
      if (out.contains(rr, cc)) out(rr, cc) = 1;
    }
  return out;
}

}  // namespace

TEST_CASE("analytic annulus: radii 20/14 px, spacing (0.1, 0.1, 1.0), 10 slices") {
  const auto s = ring_stack(10, 20, 14);
  const double analytic = std::numbers::pi * (400.0 - 196.0) * 0.01 * 10;
  CHECK(analytic == doctest::Approx(64.09).epsilon(1e-3));
  const double v = vwv(s, {0.1, 0.1, 1.0});
  CHECK(std::abs(v - analytic) / analytic < 0.03);
}

TEST_CASE("vwv is the pixel count sum times voxel size") {
  const auto s = ring_stack(4, 18, 9);
  double px = 0;
  for (const auto& lp : s) px += double(count_foreground(lp.mab)) - double(count_foreground(lp.lib));
  CHECK(vwv(s, {0.1, 0.2, 0.5}) == doctest::Approx(px * 0.1 * 0.2 * 0.5).epsilon(1e-12));
  CHECK(vwv(s, {0.1, 0.2, 1.0}) == doctest::Approx(2 * vwv(s, {0.1, 0.2, 0.5})).epsilon(1e-12));
  const auto rep = volume_report(s, {0.1, 0.2, 0.5});
  double sum = 0;
  for (double a : rep.per_slice_wall_area) sum += a;
  CHECK(rep.vwv == doctest::Approx(sum * 0.5).epsilon(1e-12));
  CHECK(rep.vwv == doctest::Approx(vwv(s, {0.1, 0.2, 0.5})).epsilon(1e-12));
}

TEST_CASE("zero wall and non-nested input") {
  auto s = ring_stack(3, 15, 15);
  CHECK(vwv(s, {0.1, 0.1, 1}) == 0.0);
  s = ring_stack(3, 15, 8);
  std::swap(s[1].mab, s[1].lib);
  CHECK_THROWS_AS(vwv(s, {0.1, 0.1, 1}), ArgumentError);
  CHECK_THROWS_AS(volume_report(s, {0.1, 0.1, 1}), ArgumentError);
}

TEST_CASE("vwv is invariant under in-plane rigid motion of each slice") {
  auto s = ring_stack(5, 16, 10);
  s[2] = fixtures::annulus(64, 64, 30, 28, 16, 9, 2);
  const double before = vwv(s, {0.1, 0.1, 1});
  for (int i = 0; i < 5; ++i) {
    s[i].mab = rigid(s[i].mab, i - 2, 2 - i);
    s[i].lib = rigid(s[i].lib, i - 2, 2 - i);
  }
  CHECK(vwv(s, {0.1, 0.1, 1}) == before);
}

TEST_CASE("vwt profiles") {
  SUBCASE("concentric circles 12 / 10 mm") {
    const auto t = vwt_profile(ellipse_contour(12, 12, 400), ellipse_contour(10, 10, 400));
    for (double d : t) CHECK(d == doctest::Approx(2.0).epsilon(0.01));
  }
  SUBCASE("identical contours give zero thickness") {
    const auto c = ellipse_contour(9, 7, 200);
    for (double d : vwt_profile(c, c)) CHECK(d == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("elliptical MAB 12x10 around a circular LIB r = 8: thickness spans 2 to 4 mm") {
    const auto t = vwt_profile(ellipse_contour(12, 10, 600), ellipse_contour(8, 8, 600));
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    CHECK(*lo == doctest::Approx(2.0).epsilon(0.02));
    CHECK(*hi == doctest::Approx(4.0).epsilon(0.02));
    for (double d : t) CHECK(d >= 0.0);
  }
  SUBCASE("LIB outside MAB is rejected") {
    CHECK_THROWS_AS(vwt_profile(ellipse_contour(8, 8, 100), ellipse_contour(10, 10, 100)), ArgumentError);
  }
}

TEST_CASE("volume report from masks: VWT near the analytic 2 mm wall") {
  std::vector<LabelPair> s;
  for (int i = 0; i < 3; ++i) s.push_back(fixtures::annulus(301, 301, 150, 150, 120, 100, i));
  const auto rep = volume_report(s, {0.1, 0.1, 1.0});
  REQUIRE(rep.vwt_profiles.size() == 3);
  for (const auto& p : rep.vwt_profiles) {
    REQUIRE_FALSE(p.empty());
    for (double d : p) CHECK(std::abs(d - 2.0) < 0.1);
  }
  CHECK(std::abs(rep.vwt_mean - 2.0) < 0.05);
  CHECK(std::abs(rep.vwt_weighted_mean - 2.0) < 0.05);

  fixtures::TempDir tmp("vr");
  write_volume_report(tmp.path() / "r.json", rep);
  std::ifstream in(tmp.path() / "r.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["vwv_mm3"].get<double>() == doctest::Approx(rep.vwv));
  CHECK(j["slices"].size() == 3);
}

TEST_CASE("slices without a lumen have an empty profile but still count wall area") {
  std::vector<LabelPair> s{fixtures::annulus(40, 40, 20, 20, 10, 0, 0)};
  s[0].lib = Mask(40, 40);
  const auto rep = volume_report(s, {0.1, 0.1, 1.0});
  CHECK(rep.vwt_profiles[0].empty());
  CHECK(rep.vwv > 0);
  CHECK(rep.vwt_mean == 0.0);
}
