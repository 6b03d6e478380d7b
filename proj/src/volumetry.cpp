#include "carotid/volumetry.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace carotid {

namespace {

double wall_pixels(const LabelPair& lp) {
  require_same_shape(lp.mab, lp.lib, "vwv: MAB/LIB size mismatch");
  std::size_t mab = 0, lib = 0;
  for (std::size_t i = 0; i < lp.mab.size(); ++i) {
    const bool m = lp.mab.values()[i] != 0;
    const bool l = lp.lib.values()[i] != 0;
    if (l && !m) {
      throw ArgumentError("vwv: LIB not nested in MAB on slice " + std::to_string(lp.slice_index));
    }
    mab += m;
    lib += l;
  }
  return static_cast<double>(mab) - static_cast<double>(lib);
}

}  // namespace

double vwv(const std::vector<LabelPair>& slices, Spacing3 spacing) {
  double px = 0;
  for (const auto& lp : slices) px += wall_pixels(lp);
  return px * spacing.x * spacing.y * spacing.z;
}

std::vector<double> vwt_profile(const Contour& mab, const Contour& lib) {
  if (mab.points.size() < 3 || lib.points.size() < 3) {
    throw ArgumentError("vwt_profile: degenerate contour");
  }
  // LIB vertices must be inside MAB or on it (identical contours are allowed).
  for (const auto& p : lib.points) {
    if (contains_point(mab, p)) continue;
    bool on_boundary = false;
    for (const auto& q : mab.points) {
      if (std::hypot(p.x - q.x, p.y - q.y) < 1e-9) {
        on_boundary = true;
        break;
      }
    }
    if (!on_boundary) throw ArgumentError("vwt_profile: LIB contour is not inside MAB contour");
  }
  std::vector<double> out;
  for (const auto& pair : symmetric_correspondence(mab, lib)) out.push_back(pair.distance);
  return out;
}

VolumeReport volume_report(const std::vector<LabelPair>& slices, Spacing3 spacing) {
  VolumeReport rep;
  const Spacing2 in_plane{spacing.x, spacing.y};
  double weight_sum = 0, weighted = 0, plain = 0;
  int n_profiles = 0;
  for (const auto& lp : slices) {
    const double area = wall_pixels(lp) * spacing.x * spacing.y;
    rep.per_slice_wall_area.push_back(area);
    rep.slice_indices.push_back(lp.slice_index);
    std::vector<double> profile;
    const Mask mab = largest_component(lp.mab);
    const Mask lib = largest_component(lp.lib);
    if (count_foreground(mab) >= 3 && count_foreground(lib) >= 3) {
      try {
        profile = vwt_profile(extract_contour(mab, in_plane), extract_contour(lib, in_plane));
      } catch (const ArgumentError&) {
        profile.clear();
      }
    }
    if (!profile.empty()) {
      const double mean = std::accumulate(profile.begin(), profile.end(), 0.0) / profile.size();
      plain += mean;
      ++n_profiles;
      weighted += mean * area;
      weight_sum += area;
    }
    rep.vwt_profiles.push_back(std::move(profile));
  }
  rep.vwv = std::accumulate(rep.per_slice_wall_area.begin(), rep.per_slice_wall_area.end(), 0.0) *
            spacing.z;
  rep.vwt_mean = n_profiles ? plain / n_profiles : 0.0;
  rep.vwt_weighted_mean = weight_sum > 0 ? weighted / weight_sum : 0.0;
  return rep;
}

void write_volume_report(const std::filesystem::path& path, const VolumeReport& r) {
  nlohmann::json slices = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_slice_wall_area.size(); ++i) {
    const auto& prof = r.vwt_profiles[i];
    nlohmann::json row = {{"slice", r.slice_indices[i]}, {"wall_area_mm2", r.per_slice_wall_area[i]}};
    if (!prof.empty()) {
      row["vwt_mean_mm"] = std::accumulate(prof.begin(), prof.end(), 0.0) / prof.size();
      row["vwt_max_mm"] = *std::max_element(prof.begin(), prof.end());
      row["vwt_profile_mm"] = prof;
    }
    slices.push_back(std::move(row));
  }
  nlohmann::json j = {{"vwv_mm3", r.vwv},
                      {"vwt_mean_mm", r.vwt_mean},
                      {"vwt_weighted_mean_mm", r.vwt_weighted_mean},
                      {"slices", slices}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace carotid
