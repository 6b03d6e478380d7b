#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "carotid/stats.hpp"

namespace carotid::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  ///< scatter instead of a polyline
};

struct Figure {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<double> hlines;  ///< dashed horizontal reference lines
  int width = 640;
  int height = 480;
};

/// Self-contained SVG document. Non-finite points are dropped.
std::string to_svg(const Figure& fig);
void save_svg(const std::filesystem::path& path, const Figure& fig);

/// Scatter of (x, y) with the least-squares line and r in the title.
Figure correlation_figure(const std::vector<double>& x, const std::vector<double>& y,
                          const std::string& x_label, const std::string& y_label);

/// Mean vs difference (a - b) with bias and 95% limits.
Figure bland_altman_figure(const std::vector<double>& a, const std::vector<double>& b,
                           const std::string& units);

/// Training curves from a `train_log.csv`: the three component losses plus
/// validation loss and DSC against epoch.
Figure loss_curve_figure(const std::filesystem::path& train_log_csv);

}  // namespace carotid::plot
