#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "carotid/volume_io.hpp"

namespace carotid {

/// Geometric training augmentation. Defaults reproduce the published setup:
/// flips with probability 0.5, translation up to 20% of the image size and
/// rotation within +/-20 degrees.
struct AugmentPolicy {
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double max_translate_frac = 0.2;
  double max_rotate_deg = 20.0;
  std::uint64_t seed = 0;
  /// Draw shifts from [-f*H, f*H] instead of the one-sided [0, f*H].
  bool symmetric_translation = false;

  static AugmentPolicy identity() { return {0.0, 0.0, 0.0, 0.0, 0, false}; }
};

void validate_policy(const AugmentPolicy& policy);

// --- elementary transforms --------------------------------------------------

/// Mirror left-right (about the vertical center line).
template <class T>
Grid<T> hflip(const Grid<T>& g) {
  Grid<T> out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) out(r, c) = g(r, g.cols() - 1 - c);
  return out;
}

/// Mirror top-bottom.
template <class T>
Grid<T> vflip(const Grid<T>& g) {
  Grid<T> out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) out(r, c) = g(g.rows() - 1 - r, c);
  return out;
}

/// Integer shift by (dy rows, dx cols) with zero fill.
template <class T>
Grid<T> translate(const Grid<T>& g, int dy, int dx) {
  Grid<T> out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r) {
    const int sr = r - dy;
    if (sr < 0 || sr >= g.rows()) continue;
    for (int c = 0; c < g.cols(); ++c) {
      const int sc = c - dx;
      if (sc >= 0 && sc < g.cols()) out(r, c) = g(sr, sc);
    }
  }
  return out;
}

/// Rotation about the image center, bilinear, zero fill.
Image rotate(const Image& image, double degrees);
/// Rotation about the image center, nearest neighbour, zero fill.
Mask rotate(const Mask& mask, double degrees);

// --- shape-based interpolation ----------------------------------------------

/// Signed Euclidean distance map in pixels, positive inside. Values are
/// offset by half a pixel so the zero level lies on the pixel boundary:
/// every foreground pixel is >= 0.5 and every background pixel <= -0.5.
Grid<float> signed_distance(const Mask& mask);

struct ReslicedStack {
  Volume volume;
  std::vector<LabelPair> labels;
};

/// Resamples the labeled slab of a volume to `target_spacing` along the slice
/// axis. Masks are recovered from linearly interpolated signed distance maps
/// thresholded at zero; images are interpolated linearly. Output slice k sits
/// at k * target_spacing from the first labeled slice.
ReslicedStack shape_interp_reslice(const Volume& volume, const std::vector<LabelPair>& labels,
                                   double target_spacing);

// --- random augmentation -----------------------------------------------------

struct AugmentDraw {
  bool hflip = false;
  bool vflip = false;
  int shift_rows = 0;
  int shift_cols = 0;
  double degrees = 0.0;
};

/// Draws one transform. The number of engine calls does not depend on the
/// policy, so streams stay aligned across settings sharing a seed.
AugmentDraw draw_augment(const AugmentPolicy& policy, int rows, int cols, std::mt19937_64& rng);

std::pair<Image, LabelPair> apply_augment(const Image& image, const LabelPair& labels,
                                          const AugmentDraw& draw);

/// Flip, flip, translate, rotate; the same transform for image and both masks.
std::pair<Image, LabelPair> augment_sample(const Image& image, const LabelPair& labels,
                                           const AugmentPolicy& policy, std::mt19937_64& rng);

}  // namespace carotid
