#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "carotid/grid.hpp"

namespace carotid {

/// Fixed network input size every slice (or ROI crop) is resampled to.
inline constexpr int kInputRows = 256;
inline constexpr int kInputCols = 320;

struct Spacing2 {
  double x = 1.0;  ///< mm per column
  double y = 1.0;  ///< mm per row
};

struct PixelCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Axis-aligned ROI on one slice. `bottom_right` is exclusive, so the crop is
/// (bottom_right.row - top_left.row) x (bottom_right.col - top_left.col).
struct RoiBox {
  PixelCoord top_left;
  PixelCoord bottom_right;
  int slice_index = 0;

  int height() const { return bottom_right.row - top_left.row; }
  int width() const { return bottom_right.col - top_left.col; }
  friend bool operator==(const RoiBox&, const RoiBox&) = default;
};

void validate_roi(const RoiBox& box);

struct Volume {
  std::vector<Image> slices;
  Spacing2 in_plane_spacing;
  double slice_spacing = 1.0;
  std::string slice_axis_label = "axial";
  std::optional<RoiBox> roi_first;
  std::optional<RoiBox> roi_last;

  int n_slices() const { return static_cast<int>(slices.size()); }
  int rows() const { return slices.empty() ? 0 : slices.front().rows(); }
  int cols() const { return slices.empty() ? 0 : slices.front().cols(); }
};

/// MAB-interior and LIB-interior masks for one slice; LIB must lie inside MAB.
struct LabelPair {
  Mask mab;
  Mask lib;
  int slice_index = 0;
};

/// Throws FormatError when the masks differ in shape or LIB escapes MAB.
void validate_label_pair(const LabelPair& labels);

struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
};

// --- intensity -------------------------------------------------------------

/// Linear rescale of all slices to [0,1] using the volume-wide min/max.
/// A constant volume maps to all zeros.
void normalize_intensity(std::vector<Image>& slices);

Image to_image(const Grid<std::uint8_t>& pixels);
Grid<std::uint8_t> to_gray8(const Image& image);

// --- resampling ------------------------------------------------------------

/// Remembers the source geometry of a resampled slice so that network-space
/// masks can be mapped back.
struct ResliceMap {
  int src_rows = 0;
  int src_cols = 0;
  int dst_rows = kInputRows;
  int dst_cols = kInputCols;
};

struct Resliced {
  Image image;
  ResliceMap map;
};

/// Pixel-center aligned bilinear resampling with edge clamping.
Image resample_bilinear(const Image& src, int rows, int cols);
Mask resample_nearest(const Mask& src, int rows, int cols);

/// Resamples a slice to the 256x320 network input.
Resliced reslice_to_input(const Image& slice);
Mask reslice_mask_to_input(const Mask& mask);
/// Inverse of reslice_to_input for masks (nearest neighbour).
Mask map_mask_back(const Mask& network_mask, const ResliceMap& map);

// --- ROI ---------------------------------------------------------------------

inline constexpr int kRoiExpansion = 20;

RoiBox expand_roi(const RoiBox& box, int margin, int rows, int cols);

/// Expands both endpoint boxes by 20 px (clamped to the rows x cols frame) and
/// linearly interpolates the corners for every slice from first to last
/// inclusive. Top-left corners round half down and bottom-right corners round
/// half up, so ties always enlarge the box.
std::vector<RoiBox> interpolate_roi(const RoiBox& first, const RoiBox& last, int rows, int cols);

/// Box for an arbitrary slice: interpolated inside the endpoint range,
/// the nearest expanded endpoint outside it.
RoiBox roi_for_slice(const RoiBox& first, const RoiBox& last, int slice, int rows, int cols);

Image crop(const Image& image, const RoiBox& box);
Mask crop(const Mask& mask, const RoiBox& box);
/// Writes `patch` into a zero frame of the given size at the box position.
Mask paste(const Mask& patch, const RoiBox& box, int rows, int cols);

// --- splits ----------------------------------------------------------------

/// 60/20/20 split by unique subject id. Duplicate ids (several volumes of one
/// subject) collapse to one entry, so a subject never straddles partitions.
DatasetSplit make_split(const std::vector<std::string>& subject_ids, std::uint64_t seed);

// --- on-disk formats ---------------------------------------------------------

std::string slice_file_name(int index);
std::string label_file_name(int index, const char* boundary);

Volume load_volume(const std::filesystem::path& dir);
void save_volume(const std::filesystem::path& dir, const Volume& volume);

/// Loads every slice that has both `_mab` and `_lib` masks, sorted by index.
std::vector<LabelPair> load_labels(const std::filesystem::path& dir);
void save_labels(const std::filesystem::path& dir, const std::vector<LabelPair>& labels);

struct CohortEntry {
  std::string volume_id;
  std::string subject_id;
};

/// Cohort layout: `<root>/cohort.json` plus `<root>/<volume_id>/{image,label}`.
std::vector<CohortEntry> load_cohort(const std::filesystem::path& root);
void save_cohort(const std::filesystem::path& root, const std::vector<CohortEntry>& entries);
std::filesystem::path image_dir(const std::filesystem::path& root, const std::string& volume_id);
std::filesystem::path label_dir(const std::filesystem::path& root, const std::string& volume_id);

}  // namespace carotid
