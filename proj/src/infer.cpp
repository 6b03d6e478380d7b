#include "carotid/infer.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "carotid/augment.hpp"
#include "carotid/metrics.hpp"

namespace carotid {

const char* to_string(Artery a) { return a == Artery::CCA ? "cca" : "ica"; }

Artery artery_from_string(const std::string& s) {
  if (s == "cca" || s == "CCA") return Artery::CCA;
  if (s == "ica" || s == "ICA") return Artery::ICA;
  throw ArgumentError("unknown artery '" + s + "' (expected cca or ica)");
}

Mask binarize(const Grid<float>& prob, float threshold) {
  Mask out(prob.rows(), prob.cols());
  for (std::size_t i = 0; i < prob.size(); ++i) out.values()[i] = prob.values()[i] >= threshold;
  return out;
}

Mask majority_vote(std::span<const Mask> votes) {
  if (votes.empty() || votes.size() % 2 == 0) {
    throw ArgumentError("majority_vote needs an odd, non-zero number of votes");
  }
  Mask out(votes[0].rows(), votes[0].cols());
  for (const auto& v : votes) require_same_shape(v, out, "majority_vote: vote size mismatch");
  const std::size_t need = votes.size() / 2 + 1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t yes = 0;
    for (const auto& v : votes) yes += v.values()[i] != 0;
    out.values()[i] = yes >= need;
  }
  return out;
}

void enforce_nesting(LabelPair& labels) {
  require_same_shape(labels.mab, labels.lib, "MAB/LIB size mismatch");
  for (std::size_t i = 0; i < labels.lib.size(); ++i) {
    labels.lib.values()[i] = labels.lib.values()[i] && labels.mab.values()[i];
  }
}

namespace {

std::vector<ProbabilityPair> run(const Predictor& model, const std::vector<Image>& batch) {
  auto out = model(batch);
  if (out.size() != batch.size()) throw ShapeError("predictor returned a wrong batch size");
  return out;
}

// Batch layout for TTA: [original, hflip, vflip]; undo flips on the outputs.
std::vector<Image> tta_inputs(const Image& image) { return {image, hflip(image), vflip(image)}; }

LabelPair vote_tta(std::span<const ProbabilityPair> outs, float threshold) {
  const Mask mab[3] = {binarize(outs[0].mab, threshold), hflip(binarize(outs[1].mab, threshold)),
                       vflip(binarize(outs[2].mab, threshold))};
  const Mask lib[3] = {binarize(outs[0].lib, threshold), hflip(binarize(outs[1].lib, threshold)),
                       vflip(binarize(outs[2].lib, threshold))};
  return {majority_vote(mab), majority_vote(lib), 0};
}

}  // namespace

LabelPair predict_plain(const Predictor& model, const Image& image, float threshold) {
  const auto out = run(model, {image});
  return {binarize(out[0].mab, threshold), binarize(out[0].lib, threshold), 0};
}

LabelPair tta_predict(const Predictor& model, const Image& image, float threshold) {
  const auto out = run(model, tta_inputs(image));
  return vote_tta(out, threshold);
}

NetworkInput prepare_slice(const Volume& volume, int slice, Artery artery, int rows, int cols) {
  NetworkInput in;
  const Image& full = volume.slices.at(static_cast<std::size_t>(slice));
  if (artery == Artery::CCA) {
    in.roi = {{0, 0}, {full.rows(), full.cols()}, slice};
    in.image = resample_bilinear(full, rows, cols);
    in.map = {full.rows(), full.cols(), rows, cols};
    return in;
  }
  if (!volume.roi_first || !volume.roi_last) {
    throw ArgumentError("ICA segmentation requires roi_first and roi_last in volume.json");
  }
  in.roi = roi_for_slice(*volume.roi_first, *volume.roi_last, slice, full.rows(), full.cols());
  in.cropped = true;
  in.image = resample_bilinear(crop(full, in.roi), rows, cols);
  in.map = {in.roi.height(), in.roi.width(), rows, cols};
  return in;
}

Mask restore_mask(const Mask& network_mask, const NetworkInput& input, int rows, int cols) {
  Mask back = map_mask_back(network_mask, input.map);
  if (!input.cropped) return back;
  return paste(back, input.roi, rows, cols);
}

SegmentationResult segment_volume(const Predictor& model, const Volume& volume, Artery artery,
                                  const SegmentOptions& options) {
  if (artery == Artery::ICA && (!volume.roi_first || !volume.roi_last)) {
    throw ArgumentError("ICA segmentation requires roi_first and roi_last in volume.json");
  }
  SegmentationResult res;
  res.artery = artery;
  res.tta = options.tta;
  res.in_plane_spacing = volume.in_plane_spacing;
  res.slice_spacing = volume.slice_spacing;

  const int per_slice = options.tta ? 3 : 1;
  const int chunk = std::max(1, options.batch_size / per_slice);
  for (int s0 = 0; s0 < volume.n_slices(); s0 += chunk) {
    const int s1 = std::min(volume.n_slices(), s0 + chunk);
    std::vector<NetworkInput> inputs;
    std::vector<Image> batch;
    for (int s = s0; s < s1; ++s) {
      inputs.push_back(
          prepare_slice(volume, s, artery, options.input_rows, options.input_cols));
      if (options.tta) {
        for (auto& im : tta_inputs(inputs.back().image)) batch.push_back(std::move(im));
      } else {
        batch.push_back(inputs.back().image);
      }
    }
    const auto outs = run(model, batch);
    for (int s = s0; s < s1; ++s) {
      const auto k = static_cast<std::size_t>(s - s0);
      LabelPair net = options.tta
                          ? vote_tta(std::span(outs).subspan(k * 3, 3), options.threshold)
                          : LabelPair{binarize(outs[k].mab, options.threshold),
                                      binarize(outs[k].lib, options.threshold), 0};
      LabelPair lp{restore_mask(net.mab, inputs[k], volume.rows(), volume.cols()),
                   restore_mask(net.lib, inputs[k], volume.rows(), volume.cols()), s};
      if (options.largest_component) {
        lp.mab = largest_component(lp.mab);
        lp.lib = largest_component(lp.lib);
      }
      enforce_nesting(lp);
      res.slices.push_back(std::move(lp));
    }
  }
  return res;
}

void save_result(const std::filesystem::path& dir, const SegmentationResult& result) {
  save_labels(dir, result.slices);
  nlohmann::json j = {{"artery", to_string(result.artery)},
                      {"tta", result.tta},
                      {"config_hash", result.config_hash},
                      {"checkpoint_id", result.checkpoint_id},
                      {"n_slices", result.slices.size()},
                      {"in_plane_spacing_mm", {result.in_plane_spacing.x, result.in_plane_spacing.y}},
                      {"slice_spacing_mm", result.slice_spacing}};
  std::ofstream out(dir / "result.json");
  if (!out) throw IoError("cannot write " + (dir / "result.json").string());
  out << j.dump(2) << '\n';
}

SegmentationResult load_result(const std::filesystem::path& dir) {
  SegmentationResult r;
  r.slices = load_labels(dir);
  std::ifstream in(dir / "result.json");
  if (!in) return r;
  try {
    const auto j = nlohmann::json::parse(in);
    r.artery = artery_from_string(j.value("artery", std::string("cca")));
    r.tta = j.value("tta", false);
    r.config_hash = j.value("config_hash", std::string());
    r.checkpoint_id = j.value("checkpoint_id", std::string());
    if (j.contains("in_plane_spacing_mm")) {
      r.in_plane_spacing = {j["in_plane_spacing_mm"][0].get<double>(),
                            j["in_plane_spacing_mm"][1].get<double>()};
    }
    r.slice_spacing = j.value("slice_spacing_mm", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad result.json in " + dir.string() + ": " + e.what());
  }
  return r;
}

}  // namespace carotid
