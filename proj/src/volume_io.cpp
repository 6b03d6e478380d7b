#include "carotid/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "carotid/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace carotid {

void validate_roi(const RoiBox& box) {
  if (box.top_left.row >= box.bottom_right.row || box.top_left.col >= box.bottom_right.col) {
    throw ArgumentError("ROI top_left must be strictly above-left of bottom_right");
  }
}

void validate_label_pair(const LabelPair& labels) {
  if (!labels.mab.same_shape(labels.lib)) {
    throw FormatError("MAB and LIB masks differ in size on slice " +
                      std::to_string(labels.slice_index));
  }
  auto mab = labels.mab.values();
  auto lib = labels.lib.values();
  for (std::size_t i = 0; i < lib.size(); ++i) {
    if (lib[i] && !mab[i]) {
      throw FormatError("LIB mask is not contained in MAB mask on slice " +
                        std::to_string(labels.slice_index));
    }
  }
}

void normalize_intensity(std::vector<Image>& slices) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  for (const auto& s : slices) {
    for (float v : s.values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (slices.empty()) return;
  const float range = hi - lo;
  for (auto& s : slices) {
    for (float& v : s.values()) v = range > 0.f ? (v - lo) / range : 0.f;
  }
}

Image to_image(const Grid<std::uint8_t>& pixels) {
  Image out(pixels.rows(), pixels.cols());
  for (std::size_t i = 0; i < pixels.size(); ++i) out.values()[i] = pixels.values()[i] / 255.0f;
  return out;
}

Grid<std::uint8_t> to_gray8(const Image& image) {
  Grid<std::uint8_t> out(image.rows(), image.cols());
  for (std::size_t i = 0; i < image.size(); ++i) {
    float v = std::clamp(image.values()[i], 0.0f, 1.0f);
    out.values()[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Source coordinate of a destination pixel center under pixel-center alignment.
inline double src_coord(int dst, int src_n, int dst_n) {
  return (dst + 0.5) * static_cast<double>(src_n) / dst_n - 0.5;
}

void require_resample_args(int src_rows, int src_cols, int rows, int cols) {
  if (src_rows < 1 || src_cols < 1) throw ShapeError("cannot resample an empty slice");
  if (rows < 1 || cols < 1) throw ShapeError("resample target must be non-empty");
}

}  // namespace

Image resample_bilinear(const Image& src, int rows, int cols) {
  require_resample_args(src.rows(), src.cols(), rows, cols);
  if (src.rows() == rows && src.cols() == cols) return src;
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double y = std::clamp(src_coord(r, src.rows(), rows), 0.0, src.rows() - 1.0);
    int y0 = static_cast<int>(std::floor(y));
    int y1 = std::min(y0 + 1, src.rows() - 1);
    double fy = y - y0;
    for (int c = 0; c < cols; ++c) {
      double x = std::clamp(src_coord(c, src.cols(), cols), 0.0, src.cols() - 1.0);
      int x0 = static_cast<int>(std::floor(x));
      int x1 = std::min(x0 + 1, src.cols() - 1);
      double fx = x - x0;
      double top = src(y0, x0) * (1 - fx) + src(y0, x1) * fx;
      double bot = src(y1, x0) * (1 - fx) + src(y1, x1) * fx;
      out(r, c) = static_cast<float>(top * (1 - fy) + bot * fy);
    }
  }
  return out;
}

Mask resample_nearest(const Mask& src, int rows, int cols) {
  require_resample_args(src.rows(), src.cols(), rows, cols);
  if (src.rows() == rows && src.cols() == cols) return src;
  Mask out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    int y = std::clamp(static_cast<int>(std::lround(src_coord(r, src.rows(), rows))), 0,
                       src.rows() - 1);
    for (int c = 0; c < cols; ++c) {
      int x = std::clamp(static_cast<int>(std::lround(src_coord(c, src.cols(), cols))), 0,
                         src.cols() - 1);
      out(r, c) = src(y, x);
    }
  }
  return out;
}

Resliced reslice_to_input(const Image& slice) {
  if (slice.rows() < 2 || slice.cols() < 2) {
    throw ShapeError("reslice_to_input needs at least 2 pixels along each axis");
  }
  return {resample_bilinear(slice, kInputRows, kInputCols),
          ResliceMap{slice.rows(), slice.cols(), kInputRows, kInputCols}};
}

Mask reslice_mask_to_input(const Mask& mask) {
  return resample_nearest(mask, kInputRows, kInputCols);
}

Mask map_mask_back(const Mask& network_mask, const ResliceMap& map) {
  if (network_mask.rows() != map.dst_rows || network_mask.cols() != map.dst_cols) {
    throw ShapeError("mask does not match the reslice map's network geometry");
  }
  return resample_nearest(network_mask, map.src_rows, map.src_cols);
}

// ---------------------------------------------------------------------------

RoiBox expand_roi(const RoiBox& box, int margin, int rows, int cols) {
  RoiBox out = box;
  out.top_left.row = std::clamp(box.top_left.row - margin, 0, rows);
  out.top_left.col = std::clamp(box.top_left.col - margin, 0, cols);
  out.bottom_right.row = std::clamp(box.bottom_right.row + margin, 0, rows);
  out.bottom_right.col = std::clamp(box.bottom_right.col + margin, 0, cols);
  return out;
}

namespace {

int round_half_down(double v) { return static_cast<int>(std::ceil(v - 0.5)); }
int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

RoiBox lerp_box(const RoiBox& a, const RoiBox& b, int slice) {
  const double t = static_cast<double>(slice - a.slice_index) / (b.slice_index - a.slice_index);
  auto lerp = [t](int u, int v) { return u + t * (v - u); };
  RoiBox out;
  out.slice_index = slice;
  out.top_left = {round_half_down(lerp(a.top_left.row, b.top_left.row)),
                  round_half_down(lerp(a.top_left.col, b.top_left.col))};
  out.bottom_right = {round_half_up(lerp(a.bottom_right.row, b.bottom_right.row)),
                      round_half_up(lerp(a.bottom_right.col, b.bottom_right.col))};
  return out;
}

void check_endpoints(const RoiBox& first, const RoiBox& last) {
  validate_roi(first);
  validate_roi(last);
  if (first.slice_index >= last.slice_index) {
    throw ArgumentError("ROI endpoints must lie on distinct slices with first < last");
  }
}

}  // namespace

std::vector<RoiBox> interpolate_roi(const RoiBox& first, const RoiBox& last, int rows,
                                    int cols) {
  check_endpoints(first, last);
  const RoiBox a = expand_roi(first, kRoiExpansion, rows, cols);
  const RoiBox b = expand_roi(last, kRoiExpansion, rows, cols);
  std::vector<RoiBox> boxes;
  boxes.reserve(static_cast<std::size_t>(last.slice_index - first.slice_index + 1));
  for (int s = first.slice_index; s <= last.slice_index; ++s) boxes.push_back(lerp_box(a, b, s));
  return boxes;
}

RoiBox roi_for_slice(const RoiBox& first, const RoiBox& last, int slice, int rows, int cols) {
  check_endpoints(first, last);
  const RoiBox a = expand_roi(first, kRoiExpansion, rows, cols);
  const RoiBox b = expand_roi(last, kRoiExpansion, rows, cols);
  RoiBox out;
  if (slice <= first.slice_index) {
    out = a;
  } else if (slice >= last.slice_index) {
    out = b;
  } else {
    out = lerp_box(a, b, slice);
  }
  out.slice_index = slice;
  return out;
}

namespace {

template <class T>
Grid<T> crop_impl(const Grid<T>& g, const RoiBox& box) {
  validate_roi(box);
  if (box.top_left.row < 0 || box.top_left.col < 0 || box.bottom_right.row > g.rows() ||
      box.bottom_right.col > g.cols()) {
    throw ShapeError("ROI lies outside the slice");
  }
  Grid<T> out(box.height(), box.width());
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) out(r, c) = g(box.top_left.row + r, box.top_left.col + c);
  }
  return out;
}

}  // namespace

Image crop(const Image& image, const RoiBox& box) { return crop_impl(image, box); }
Mask crop(const Mask& mask, const RoiBox& box) { return crop_impl(mask, box); }

Mask paste(const Mask& patch, const RoiBox& box, int rows, int cols) {
  if (patch.rows() != box.height() || patch.cols() != box.width()) {
    throw ShapeError("patch does not match ROI size");
  }
  Mask out(rows, cols);
  for (int r = 0; r < patch.rows(); ++r) {
    for (int c = 0; c < patch.cols(); ++c) {
      int rr = box.top_left.row + r;
      int cc = box.top_left.col + c;
      if (out.contains(rr, cc)) out(rr, cc) = patch(r, c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

DatasetSplit make_split(const std::vector<std::string>& subject_ids, std::uint64_t seed) {
  std::set<std::string> unique(subject_ids.begin(), subject_ids.end());
  std::vector<std::string> ids(unique.begin(), unique.end());
  const auto n = ids.size();
  if (n < 5) throw ArgumentError("make_split needs at least 5 subjects");

  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(ids[i], ids[rng() % (i + 1)]);

  const auto n_train = static_cast<std::size_t>(std::lround(0.6 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(n)));
  DatasetSplit split;
  split.train_ids.assign(ids.begin(), ids.begin() + n_train);
  split.val_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test_ids.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

// ---------------------------------------------------------------------------

std::string slice_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slice_%04d.png", index);
  return buf;
}

std::string label_file_name(int index, const char* boundary) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "slice_%04d_%s.png", index, boundary);
  return buf;
}

namespace {

json roi_to_json(const RoiBox& b) {
  return {{"slice", b.slice_index},
          {"top_left", {b.top_left.row, b.top_left.col}},
          {"bottom_right", {b.bottom_right.row, b.bottom_right.col}}};
}

RoiBox roi_from_json(const json& j) {
  RoiBox b;
  b.slice_index = j.at("slice").get<int>();
  b.top_left = {j.at("top_left").at(0).get<int>(), j.at("top_left").at(1).get<int>()};
  b.bottom_right = {j.at("bottom_right").at(0).get<int>(), j.at("bottom_right").at(1).get<int>()};
  validate_roi(b);
  return b;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError("missing file " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

// Slice indices of files named slice_NNNN<suffix>.png, sorted.
std::vector<int> indexed_files(const fs::path& dir, const std::string& suffix) {
  std::vector<int> idx;
  if (!fs::is_directory(dir)) return idx;
  const std::string tail = suffix + ".png";
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("slice_", 0) != 0 || name.size() != 10 + tail.size()) continue;
    if (name.compare(10, std::string::npos, tail) != 0) continue;
    const auto digits = name.substr(6, 4);
    if (!std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    idx.push_back(std::stoi(digits));
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

Volume load_volume(const fs::path& dir) {
  const auto meta_path = dir / "volume.json";
  if (!fs::exists(meta_path)) throw FormatError("volume sidecar missing: " + meta_path.string());
  const json meta = read_json(meta_path);

  Volume v;
  try {
    v.in_plane_spacing = {meta.at("in_plane_spacing_mm").at(0).get<double>(),
                          meta.at("in_plane_spacing_mm").at(1).get<double>()};
    v.slice_spacing = meta.at("slice_spacing_mm").get<double>();
    v.slice_axis_label = meta.value("slice_axis_label", std::string("axial"));
    if (meta.contains("roi_first")) v.roi_first = roi_from_json(meta["roi_first"]);
    if (meta.contains("roi_last")) v.roi_last = roi_from_json(meta["roi_last"]);
  } catch (const json::exception& e) {
    throw FormatError("bad volume sidecar " + meta_path.string() + ": " + e.what());
  }
  if (v.slice_spacing <= 0 || v.in_plane_spacing.x <= 0 || v.in_plane_spacing.y <= 0) {
    throw FormatError("spacings must be positive in " + meta_path.string());
  }

  const auto indices = indexed_files(dir, "");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] != static_cast<int>(i)) {
      throw FormatError("slice files are not contiguous from 0 in " + dir.string());
    }
    auto px = png::read_gray8(dir / slice_file_name(indices[i]));
    if (!v.slices.empty() && (px.rows() != v.rows() || px.cols() != v.cols())) {
      throw FormatError("inconsistent slice dimensions in " + dir.string());
    }
    v.slices.push_back(to_image(px));
  }
  if (v.slices.empty()) throw FormatError("no slice images in " + dir.string());
  normalize_intensity(v.slices);
  return v;
}

void save_volume(const fs::path& dir, const Volume& volume) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (int i = 0; i < volume.n_slices(); ++i) {
    png::write_gray8(dir / slice_file_name(i), to_gray8(volume.slices[i]));
  }
  json meta = {{"in_plane_spacing_mm", {volume.in_plane_spacing.x, volume.in_plane_spacing.y}},
               {"slice_spacing_mm", volume.slice_spacing},
               {"slice_axis_label", volume.slice_axis_label}};
  if (volume.roi_first) meta["roi_first"] = roi_to_json(*volume.roi_first);
  if (volume.roi_last) meta["roi_last"] = roi_to_json(*volume.roi_last);
  write_json(dir / "volume.json", meta);
}

std::vector<LabelPair> load_labels(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("label directory missing: " + dir.string());
  const auto mab_idx = indexed_files(dir, "_mab");
  const auto lib_idx = indexed_files(dir, "_lib");
  std::vector<int> both;
  std::set_intersection(mab_idx.begin(), mab_idx.end(), lib_idx.begin(), lib_idx.end(),
                        std::back_inserter(both));
  std::vector<LabelPair> out;
  for (int i : both) {
    LabelPair lp{png::read_mask(dir / label_file_name(i, "mab")),
                 png::read_mask(dir / label_file_name(i, "lib")), i};
    validate_label_pair(lp);
    out.push_back(std::move(lp));
  }
  return out;
}

void save_labels(const fs::path& dir, const std::vector<LabelPair>& labels) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& lp : labels) {
    png::write_mask(dir / label_file_name(lp.slice_index, "mab"), lp.mab);
    png::write_mask(dir / label_file_name(lp.slice_index, "lib"), lp.lib);
  }
}

std::vector<CohortEntry> load_cohort(const fs::path& root) {
  const json j = read_json(root / "cohort.json");
  std::vector<CohortEntry> out;
  try {
    for (const auto& e : j.at("volumes")) {
      out.push_back({e.at("id").get<std::string>(), e.at("subject").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw FormatError("bad cohort manifest in " + root.string() + ": " + e.what());
  }
  return out;
}

void save_cohort(const fs::path& root, const std::vector<CohortEntry>& entries) {
  json vols = json::array();
  for (const auto& e : entries) vols.push_back({{"id", e.volume_id}, {"subject", e.subject_id}});
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  write_json(root / "cohort.json", {{"volumes", vols}});
}

fs::path image_dir(const fs::path& root, const std::string& volume_id) {
  return root / volume_id / "image";
}

fs::path label_dir(const fs::path& root, const std::string& volume_id) {
  return root / volume_id / "label";
}

}  // namespace carotid
