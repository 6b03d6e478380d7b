#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "carotid/volume_io.hpp"

namespace carotid {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

/// Parameters of a synthetic single-tube vessel phantom. Lengths are pixels.
struct PhantomSpec {
  int n_slices = 12;
  int rows = kInputRows;
  int cols = kInputCols;
  double centerline_drift_amplitude = 6.0;
  Range mab_radius{34.0, 44.0};
  Range wall_thickness{7.0, 11.0};
  /// Ratio of the ellipse's major to minor semi-axis, >= 1.
  Range ellipticity{1.0, 1.25};
  double speckle_strength = 0.3;
  double shadow_probability = 0.1;
  std::uint64_t seed = 1;
  Spacing2 in_plane_spacing{0.1, 0.1};
  double slice_spacing = 1.0;
  /// Emit endpoint ROI boxes (ground-truth MAB bounding box +/- 5 px) for the ICA pathway.
  bool write_roi = false;
};

/// Throws ArgumentError when the spec could produce a LIB radius below 2 px,
/// a wall thinner than 1 px, or other out-of-range values.
void validate_phantom_spec(const PhantomSpec& spec);

struct Phantom {
  Volume volume;
  std::vector<LabelPair> labels;
};

/// Deterministic under `spec.seed`. Intensities are quantized to 8-bit levels so
/// that a save/load round trip reproduces the volume exactly.
Phantom generate_phantom(const PhantomSpec& spec);

/// Writes `n_volumes` phantoms under `root` in cohort layout; volumes 2k and
/// 2k+1 share subject `subj_k`. Returns the manifest entries.
std::vector<CohortEntry> generate_cohort(int n_volumes, const PhantomSpec& spec_template,
                                         std::uint64_t seed, const std::filesystem::path& root);

/// splitmix64 step, used to derive independent per-item seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace carotid
