#pragma once

#include <filesystem>
#include <vector>

#include "carotid/metrics.hpp"
#include "carotid/volume_io.hpp"

namespace carotid {

struct Spacing3 {
  double x = 1.0;  ///< mm per column
  double y = 1.0;  ///< mm per row
  double z = 1.0;  ///< mm between slices
};

/// Vessel wall volume in mm^3: sum over slices of (|MAB| - |LIB|) * pixel area
/// * slice spacing. Throws ArgumentError when LIB escapes MAB on any slice.
double vwv(const std::vector<LabelPair>& slices, Spacing3 spacing);

/// Point-wise wall thickness in mm from the symmetric correspondence between
/// the MAB and LIB contours. Throws ArgumentError unless LIB lies inside MAB.
std::vector<double> vwt_profile(const Contour& mab, const Contour& lib);

struct VolumeReport {
  double vwv = 0;
  std::vector<double> per_slice_wall_area;  ///< mm^2
  std::vector<int> slice_indices;
  std::vector<std::vector<double>> vwt_profiles;  ///< empty profile when contours are unavailable
  double vwt_mean = 0;           ///< mean of per-slice mean thickness
  double vwt_weighted_mean = 0;  ///< per-slice means weighted by wall area
};

VolumeReport volume_report(const std::vector<LabelPair>& slices, Spacing3 spacing);
void write_volume_report(const std::filesystem::path& path, const VolumeReport& report);

}  // namespace carotid
