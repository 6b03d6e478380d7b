#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "carotid/metrics.hpp"
#include "carotid/png_io.hpp"
#include "carotid/volume_io.hpp"
#include "fixtures.hpp"

using namespace carotid;
namespace fs = std::filesystem;

namespace {

Volume constant_volume(int n, int rows, int cols, float v) {
  Volume vol;
  vol.slices.assign(n, Image(rows, cols, v));
  vol.in_plane_spacing = {0.1, 0.1};
  vol.slice_spacing = 1.0;
  return vol;
}

void write_sidecar(const fs::path& dir, const nlohmann::json& j) {
  std::ofstream(dir / "volume.json") << j.dump();
}

}  // namespace

TEST_CASE("load_volume: all-black stack stays at zero") {
  fixtures::TempDir tmp("black");
  save_volume(tmp.path(), constant_volume(40, 8, 10, 0.f));
  const auto v = load_volume(tmp.path());
  CHECK(v.n_slices() == 40);
  for (const auto& s : v.slices)
    for (float x : s.values()) CHECK(x == 0.f);
}

TEST_CASE("load_volume: 0/255 pixels map to 0/1 and spacing passes through") {
  fixtures::TempDir tmp("bw");
  Grid<std::uint8_t> px(4, 5, 0);
  px(1, 2) = 255;
  for (int i = 0; i < 3; ++i) png::write_gray8(tmp.path() / slice_file_name(i), px);
  write_sidecar(tmp.path(), {{"in_plane_spacing_mm", {0.2, 0.3}}, {"slice_spacing_mm", 1.0}});
  const auto v = load_volume(tmp.path());
  CHECK(v.n_slices() == 3);
  CHECK(v.slice_spacing == 1.0);
  CHECK(v.in_plane_spacing.x == 0.2);
  CHECK(v.in_plane_spacing.y == 0.3);
  CHECK(v.slices[0](1, 2) == 1.f);
  CHECK(v.slices[0](0, 0) == 0.f);
}

TEST_CASE("load_volume: format errors") {
  fixtures::TempDir tmp("bad");
  Grid<std::uint8_t> a(4, 5, 10), b(5, 5, 10);
  png::write_gray8(tmp.path() / slice_file_name(0), a);
  SUBCASE("missing sidecar") { CHECK_THROWS_AS(load_volume(tmp.path()), FormatError); }
  SUBCASE("inconsistent slice sizes") {
    png::write_gray8(tmp.path() / slice_file_name(1), b);
    write_sidecar(tmp.path(), {{"in_plane_spacing_mm", {0.1, 0.1}}, {"slice_spacing_mm", 1.0}});
    CHECK_THROWS_AS(load_volume(tmp.path()), FormatError);
  }
  SUBCASE("non-positive spacing") {
    write_sidecar(tmp.path(), {{"in_plane_spacing_mm", {0.1, 0.0}}, {"slice_spacing_mm", 1.0}});
    CHECK_THROWS_AS(load_volume(tmp.path()), FormatError);
  }
}

TEST_CASE("processed intensities lie in [0,1] and normalization is idempotent") {
  std::mt19937_64 rng(3);
  std::vector<Image> slices;
  for (int i = 0; i < 4; ++i) {
    Image im = fixtures::random_image(6, 7, rng);
    for (auto& v : im.values()) v = 40.f + 100.f * v;
    slices.push_back(im);
  }
  normalize_intensity(slices);
  float lo = 1, hi = 0;
  for (const auto& s : slices)
    for (float v : s.values()) lo = std::min(lo, v), hi = std::max(hi, v);
  CHECK(lo == 0.f);
  CHECK(hi == 1.f);
  auto twice = slices;
  normalize_intensity(twice);
  for (std::size_t i = 0; i < slices.size(); ++i)
    for (std::size_t k = 0; k < slices[i].size(); ++k)
      CHECK(twice[i].values()[k] == doctest::Approx(slices[i].values()[k]).epsilon(1e-6));
}

TEST_CASE("volume save/load round trip is exact for 8-bit levels and keeps ROI") {
  fixtures::TempDir tmp("rt");
  Volume v = constant_volume(3, 6, 8, 0.f);
  for (int s = 0; s < 3; ++s)
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 8; ++c) v.slices[s](r, c) = static_cast<float>((s * 48 + r * 8 + c) % 256) / 255.f;
  v.slices[0](0, 0) = 0.f;
  v.slices[2](5, 7) = 1.f;
  v.roi_first = RoiBox{{1, 1}, {4, 5}, 0};
  v.roi_last = RoiBox{{2, 2}, {5, 7}, 2};
  save_volume(tmp.path(), v);
  const auto w = load_volume(tmp.path());
  for (int s = 0; s < 3; ++s) CHECK(w.slices[s] == v.slices[s]);
  REQUIRE(w.roi_first);
  CHECK(*w.roi_first == *v.roi_first);
  CHECK(*w.roi_last == *v.roi_last);
}

TEST_CASE("reslice_to_input: identity, constants, degenerate input") {
  std::mt19937_64 rng(1);
  const Image same = fixtures::random_image(kInputRows, kInputCols, rng);
  const auto r = reslice_to_input(same);
  CHECK(r.image == same);
  CHECK(r.map.src_rows == kInputRows);

  const auto big = reslice_to_input(Image(512, 640, 0.5f));
  CHECK(big.image.rows() == kInputRows);
  CHECK(big.image.cols() == kInputCols);
  for (float v : big.image.values()) CHECK(v == doctest::Approx(0.5f));

  CHECK_THROWS_AS(reslice_to_input(Image(1, 40)), ShapeError);
  CHECK_THROWS_AS(reslice_to_input(Image(0, 0)), ShapeError);
}

TEST_CASE("mask round trip through the network input keeps DSC >= 0.98") {
  // 128x160 source, convex shapes of at least 20 px diameter.
  for (double radius : {10.0, 17.0, 30.0}) {
    const Mask m = fixtures::disk(128, 160, 60.3, 81.7, radius);
    const Mask up = reslice_mask_to_input(m);
    const Mask back = map_mask_back(up, {128, 160, kInputRows, kInputCols});
    CHECK(back.rows() == 128);
    CHECK(dsc(back, m) >= 0.98);
  }
  const Mask e = fixtures::ellipse(300, 400, 150, 200, 40, 70);
  const Mask down = reslice_mask_to_input(e);
  CHECK(dsc(map_mask_back(down, {300, 400, kInputRows, kInputCols}), e) >= 0.98);
}

TEST_CASE("interpolate_roi") {
  SUBCASE("hand-computed midpoint after 20 px expansion") {
    const RoiBox first{{10, 10}, {50, 50}, 0}, last{{30, 30}, {70, 70}, 10};
    const auto boxes = interpolate_roi(first, last, 200, 200);
    REQUIRE(boxes.size() == 11);
    // Expanded endpoints: (0,0)-(70,70) [top-left clamped] and (10,10)-(90,90).
    CHECK(boxes.front() == RoiBox{{0, 0}, {70, 70}, 0});
    CHECK(boxes.back() == RoiBox{{10, 10}, {90, 90}, 10});
    CHECK(boxes[5] == RoiBox{{5, 5}, {80, 80}, 5});
  }
  SUBCASE("constant geometry gives identical boxes") {
    const RoiBox first{{40, 50}, {90, 120}, 3}, last{{40, 50}, {90, 120}, 7};
    const auto boxes = interpolate_roi(first, last, 256, 320);
    REQUIRE(boxes.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(boxes[i].top_left == PixelCoord{20, 30});
      CHECK(boxes[i].bottom_right == PixelCoord{110, 140});
      CHECK(boxes[i].slice_index == 3 + i);
    }
  }
  SUBCASE("border clamping") {
    const RoiBox first{{5, 3}, {30, 40}, 0}, last{{240, 300}, {250, 318}, 2};
    const auto boxes = interpolate_roi(first, last, 256, 320);
    CHECK(boxes.front().top_left == PixelCoord{0, 0});
    CHECK(boxes.back().bottom_right == PixelCoord{256, 320});
  }
  SUBCASE("ties enlarge the box") {
    // Expanded (0,0)-(61,61) at slice 0 and (1,1)-(62,62) at slice 2; slice 1
    // sits on half-pixel corners.
    const RoiBox first{{20, 20}, {41, 41}, 0}, last{{21, 21}, {42, 42}, 2};
    const auto boxes = interpolate_roi(first, last, 100, 100);
    CHECK(boxes[1].top_left == PixelCoord{0, 0});
    CHECK(boxes[1].bottom_right == PixelCoord{62, 62});
  }
  SUBCASE("endpoints reproduce the expanded inputs") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> u(0, 100);
    for (int t = 0; t < 50; ++t) {
      const int r0 = u(rng), c0 = u(rng), r1 = u(rng), c1 = u(rng);
      const RoiBox a{{r0, c0}, {r0 + 10 + u(rng), c0 + 10 + u(rng)}, 2};
      const RoiBox b{{r1, c1}, {r1 + 10 + u(rng), c1 + 10 + u(rng)}, 2 + 1 + u(rng) % 20};
      const auto boxes = interpolate_roi(a, b, 256, 320);
      CHECK(boxes.front() == expand_roi(a, kRoiExpansion, 256, 320));
      CHECK(boxes.back() == expand_roi(b, kRoiExpansion, 256, 320));
      for (const auto& box : boxes) {
        CHECK(box.top_left.row < box.bottom_right.row);
        CHECK(box.top_left.col < box.bottom_right.col);
        CHECK(box.top_left.row >= 0);
        CHECK(box.bottom_right.col <= 320);
      }
    }
  }
  SUBCASE("same-slice endpoints are rejected") {
    const RoiBox a{{10, 10}, {50, 50}, 4};
    CHECK_THROWS_AS(interpolate_roi(a, a, 100, 100), ArgumentError);
  }
}

TEST_CASE("roi_for_slice clamps outside the endpoint range") {
  const RoiBox first{{10, 10}, {50, 50}, 2}, last{{30, 30}, {70, 70}, 6};
  const auto boxes = interpolate_roi(first, last, 200, 200);
  CHECK(roi_for_slice(first, last, 0, 200, 200).top_left == boxes.front().top_left);
  CHECK(roi_for_slice(first, last, 4, 200, 200) == boxes[2]);
  CHECK(roi_for_slice(first, last, 9, 200, 200).bottom_right == boxes.back().bottom_right);
}

TEST_CASE("crop and paste are inverse on the box") {
  std::mt19937_64 rng(4);
  const Mask m = fixtures::random_mask(30, 40, rng);
  const RoiBox box{{5, 7}, {20, 33}, 0};
  const Mask patch = crop(m, box);
  CHECK(patch.rows() == 15);
  CHECK(patch.cols() == 26);
  const Mask back = paste(patch, box, 30, 40);
  for (int r = 0; r < 30; ++r)
    for (int c = 0; c < 40; ++c) {
      const bool inside = r >= 5 && r < 20 && c >= 7 && c < 33;
      CHECK(back(r, c) == (inside ? m(r, c) : 0));
    }
}

TEST_CASE("make_split") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("s" + std::to_string(i));
  const auto s = make_split(ids, 7);
  CHECK(s.train_ids.size() == 6);
  CHECK(s.val_ids.size() == 2);
  CHECK(s.test_ids.size() == 2);

  std::set<std::string> all(s.train_ids.begin(), s.train_ids.end());
  all.insert(s.val_ids.begin(), s.val_ids.end());
  all.insert(s.test_ids.begin(), s.test_ids.end());
  CHECK(all == std::set<std::string>(ids.begin(), ids.end()));
  CHECK(all.size() == s.train_ids.size() + s.val_ids.size() + s.test_ids.size());

  const auto again = make_split(ids, 7);
  CHECK(again.train_ids == s.train_ids);
  CHECK(again.test_ids == s.test_ids);

  // Volumes are tagged by subject; a repeated id is one subject.
  auto tagged = ids;
  tagged.push_back("s3");
  const auto t = make_split(tagged, 7);
  const int hits = std::count(t.train_ids.begin(), t.train_ids.end(), "s3") +
                   std::count(t.val_ids.begin(), t.val_ids.end(), "s3") +
                   std::count(t.test_ids.begin(), t.test_ids.end(), "s3");
  CHECK(hits == 1);

  CHECK_THROWS_AS(make_split({"a", "b", "c", "d"}, 1), ArgumentError);
}

TEST_CASE("label pairs: nesting is validated on load") {
  fixtures::TempDir tmp("labels");
  LabelPair good = fixtures::annulus(20, 20, 10, 10, 6, 3, 0);
  save_labels(tmp.path(), {good});
  const auto loaded = load_labels(tmp.path());
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].mab == good.mab);
  CHECK(loaded[0].lib == good.lib);

  LabelPair bad = fixtures::annulus(20, 20, 10, 10, 3, 6, 1);
  png::write_mask(tmp.path() / label_file_name(1, "mab"), bad.mab);
  png::write_mask(tmp.path() / label_file_name(1, "lib"), bad.lib);
  CHECK_THROWS_AS(load_labels(tmp.path()), FormatError);
  CHECK_THROWS_AS(validate_label_pair(bad), FormatError);

  LabelPair mismatched{Mask(4, 4), Mask(4, 5), 0};
  CHECK_THROWS_AS(validate_label_pair(mismatched), FormatError);
}

TEST_CASE("validate_roi rejects inverted boxes") {
  CHECK_NOTHROW(validate_roi(RoiBox{{1, 1}, {2, 2}, 0}));
  CHECK_THROWS(validate_roi(RoiBox{{5, 1}, {2, 9}, 0}));
  CHECK_THROWS(validate_roi(RoiBox{{1, 1}, {1, 9}, 0}));
}
