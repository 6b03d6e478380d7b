#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "carotid/volume_io.hpp"

namespace carotid {

enum class Boundary { MAB, LIB };
const char* to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

/// Dice similarity 2|A n M| / (|A| + |M|); two empty masks score 1.
double dsc(const Mask& a, const Mask& m);

/// Number of 4-connected foreground components.
int count_components(const Mask& mask);
/// Keeps only the largest 4-connected component (ties: first in raster order).
Mask largest_component(const Mask& mask);

struct Point2 {
  double x = 0;  ///< mm along columns
  double y = 0;  ///< mm along rows
};

/// Closed polyline in mm. Orientation is counter-clockwise in the (x, y)
/// frame, i.e. the shoelace area is positive.
struct Contour {
  std::vector<Point2> points;
  bool closed = true;
};

double signed_area(const Contour& c);
double perimeter(const Contour& c);
/// `count` points spaced evenly by arc length, starting at the first vertex.
Contour resample_contour(const Contour& c, int count);
bool contains_point(const Contour& c, Point2 p);

/// Vertex smoothing passes applied to the marching-squares polyline.
inline constexpr int kContourSmoothingPasses = 4;

/// Sub-pixel 0.5 iso-contour (marching squares) of a single-component mask,
/// lightly smoothed along the curve. Holes are ignored; the outer boundary is
/// returned.
Contour extract_contour(const Mask& mask, Spacing2 spacing);

struct PointPair {
  Point2 first;
  Point2 second;
  double distance = 0;
};

/// Bidirectional nearest-point matching between contours resampled to
/// K = max(vertex counts, 100) equal-arc-length points. The distance multiset
/// is symmetric in the two arguments.
std::vector<PointPair> symmetric_correspondence(const Contour& c1, const Contour& c2);

struct DistanceSummary {
  double mad = 0;
  double maxd = 0;
};

DistanceSummary mad_maxd(std::span<const double> distances);
DistanceSummary mad_maxd(const std::vector<PointPair>& pairs);

/// Per-boundary, per-slice metrics. MAD/MAXD are NaN when the prediction is
/// empty and no contour exists.
struct EvalRecord {
  std::string volume;
  int slice_index = 0;
  Boundary boundary = Boundary::MAB;
  double dsc = 0;
  double mad = 0;
  double maxd = 0;
};

/// Evaluates one boundary. A multi-component prediction is reduced to its
/// largest component for the distance metrics (DSC uses the full mask).
EvalRecord evaluate_boundary(const Mask& predicted, const Mask& truth, Spacing2 spacing,
                             Boundary boundary, int slice_index, const std::string& volume);

std::vector<EvalRecord> evaluate_slices(const std::vector<LabelPair>& predicted,
                                        const std::vector<LabelPair>& truth, Spacing2 spacing,
                                        const std::string& volume);

/// CSV columns: volume,slice,boundary,dsc,mad,maxd
void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& rows);
std::vector<EvalRecord> read_eval_csv(const std::filesystem::path& path);

}  // namespace carotid
