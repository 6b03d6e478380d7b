#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "carotid/probability.hpp"
#include "carotid/volume_io.hpp"

namespace carotid {

enum class Artery { CCA, ICA };
const char* to_string(Artery a);
Artery artery_from_string(const std::string& s);

/// Batched model call: network-size normalized images in, probability maps out.
using Predictor = std::function<std::vector<ProbabilityPair>(const std::vector<Image>&)>;

/// 1 where prob >= threshold.
Mask binarize(const Grid<float>& prob, float threshold = 0.5f);

/// Pixel-wise strict majority over an odd number of equally sized masks.
Mask majority_vote(std::span<const Mask> votes);

/// LIB := LIB and MAB.
void enforce_nesting(LabelPair& labels);

/// Plain prediction: one forward pass, binarized.
LabelPair predict_plain(const Predictor& model, const Image& image, float threshold = 0.5f);

/// Test-time augmentation: forward on the original, the horizontally flipped
/// and the vertically flipped image, un-flip, binarize each and keep pixels
/// voted by at least two of the three. Nesting is not enforced here.
LabelPair tta_predict(const Predictor& model, const Image& image, float threshold = 0.5f);

struct SegmentOptions {
  bool tta = false;
  float threshold = 0.5f;
  /// Optional cleanup, off by default: keep the largest connected component.
  bool largest_component = false;
  int batch_size = 8;
  /// Network input geometry.
  int input_rows = kInputRows;
  int input_cols = kInputCols;
};

struct SegmentationResult {
  std::vector<LabelPair> slices;  ///< full-frame masks in original volume coordinates
  Artery artery = Artery::CCA;
  bool tta = false;
  std::string config_hash;
  std::string checkpoint_id;
  Spacing2 in_plane_spacing;
  double slice_spacing = 1.0;
};

/// CCA: every slice resampled to the network input and mapped back.
/// ICA: per-slice interpolated ROI crops resampled to the input size and
/// pasted back into an empty full frame. Throws ArgumentError for ICA when
/// the volume has no endpoint ROI boxes.
SegmentationResult segment_volume(const Predictor& model, const Volume& volume, Artery artery,
                                  const SegmentOptions& options);

/// Network-space input for one slice of a volume, with the geometry needed to undo it.
struct NetworkInput {
  Image image;
  ResliceMap map;
  RoiBox roi;        ///< full frame for CCA
  bool cropped = false;
};

NetworkInput prepare_slice(const Volume& volume, int slice, Artery artery,
                           int rows = kInputRows, int cols = kInputCols);
Mask restore_mask(const Mask& network_mask, const NetworkInput& input, int rows, int cols);

/// Mask PNGs in label layout plus `result.json` provenance.
void save_result(const std::filesystem::path& dir, const SegmentationResult& result);
SegmentationResult load_result(const std::filesystem::path& dir);

}  // namespace carotid
