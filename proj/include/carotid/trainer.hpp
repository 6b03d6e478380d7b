#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "carotid/config.hpp"
#include "carotid/metrics.hpp"
#include "carotid/net.hpp"

namespace carotid {

/// One network-space training example (256x320 or the configured input size).
struct Sample {
  Image image;
  LabelPair labels;
};

struct VolumeData {
  std::string volume_id;
  std::string subject_id;
  Volume volume;
  std::vector<LabelPair> labels;
};

/// Loads the volumes of the given subjects from a cohort directory.
std::vector<VolumeData> load_partition(const std::filesystem::path& cohort_root,
                                       const std::vector<std::string>& subject_ids);

/// Labeled slices mapped to network space (full frame for CCA, ROI crop for ICA).
std::vector<Sample> network_samples(const VolumeData& v, Artery artery, int rows, int cols);

/// Shape-based-interpolation pool at `spacing_mm`, mapped to network space.
std::vector<Sample> resliced_samples(const VolumeData& v, Artery artery, double spacing_mm,
                                     int rows, int cols);

struct TrainingSet {
  std::vector<Sample> train;        ///< original labeled slices
  std::vector<Sample> reslice_pool; ///< empty unless reslice augmentation is used
  std::vector<Sample> validation;
};

TrainingSet build_training_set(const std::vector<VolumeData>& train,
                               const std::vector<VolumeData>& val, const TrainConfig& config,
                               const NetConfig& net);

struct StepLog {
  int epoch = 0;  ///< 1-based
  int step = 0;
  LossWeights weights;
  double loss_mab = 0;
  double loss_lib = 0;
  double loss_cvw = 0;
};

struct EpochLog {
  int epoch = 0;  ///< 1-based
  double loss_mab = 0;
  double loss_lib = 0;
  double loss_cvw = 0;
  LossWeights weights;  ///< mean over the epoch's steps
  double train_loss = 0;
  double val_loss = 0;  ///< uniform TDL on the validation slices
  double val_dsc = 0;   ///< mean of MAB and LIB Dice over validation slices
  double seconds = 0;
};

struct TrainResult {
  Segmenter model{nullptr};  ///< restored to the best-validation epoch
  std::vector<EpochLog> epochs;
  std::vector<StepLog> steps;
  int best_epoch = 0;        ///< 1-based
  double best_val_dsc = -1;
  double final_val_dsc = 0;  ///< validation DSC of the last epoch's weights
  double seconds = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam training of a Segmenter (two one-channel U-Nets for SDL, one
/// two-channel U-Net otherwise). Deterministic for a fixed seed and platform.
/// Throws ArgumentError when the training partition is empty.
TrainResult train(const TrainConfig& config, const NetConfig& net, const TrainingSet& data,
                  const EpochCallback& on_epoch = {});

struct ValidationScore {
  double loss = 0;
  double dsc = 0;
};

ValidationScore validate(Segmenter& model, const std::vector<Sample>& samples, int batch_size);

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

/// Trains from a cohort on disk and writes `checkpoint/` and `train_log.csv`
/// under `out_dir`.
TrainResult train_on_disk(const RunConfig& config, const std::filesystem::path& cohort_root,
                          const DatasetSplit& split, const std::filesystem::path& out_dir);

/// Split of a cohort by subject, seeded from the cohort configuration.
DatasetSplit cohort_split(const std::filesystem::path& cohort_root, std::uint64_t seed);

// --- experiment matrix -------------------------------------------------------

/// The nine evaluated settings: four losses with and without TTA, plus ATDL+TTA
/// trained without reslice augmentation.
struct Setting {
  std::string name;
  LossMode mode;
  bool tta;
  bool reslice;
};
const std::vector<Setting>& matrix_settings();

/// Per-setting evaluation of one artery type on the test partition.
struct SettingOutcome {
  Setting setting;
  std::vector<EvalRecord> records;
  std::map<std::string, double> manual_vwv;  ///< by volume id
  std::map<std::string, double> auto_vwv;
  double train_seconds = 0;
  double eval_seconds = 0;
};

struct MatrixReport {
  std::map<Artery, std::vector<SettingOutcome>> outcomes;
};

/// Runs all nine settings for each configured artery, writes
/// `results/<setting>/<artery>/...` plus summary tables, and returns the
/// in-memory outcomes.
MatrixReport run_matrix(const RunConfig& config, const std::filesystem::path& cohort_root,
                        const std::filesystem::path& results_root);

}  // namespace carotid
