#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "carotid/augment.hpp"
#include "carotid/infer.hpp"
#include "carotid/loss_schedule.hpp"
#include "carotid/phantom.hpp"

namespace carotid {

/// Encoder-decoder geometry. Defaults follow the canonical U-Net (depth 4,
/// 64 base channels doubling per level) on a 256x320 input.
struct NetConfig {
  int input_rows = kInputRows;
  int input_cols = kInputCols;
  int depth = 4;
  int base_channels = 64;
  double channel_growth = 2.0;
  bool batch_norm = true;
};

/// Throws ArgumentError when the input is not divisible by 2^depth.
void validate_net_config(const NetConfig& c);

enum class WeightUpdate { PerBatch, PerEpoch };

/// Optimizer and schedule settings; defaults are the published values
/// (a = 0.5, Adam lr 1e-3, betas 0.9/0.999, batch 8, 50 epochs).
struct TrainConfig {
  LossMode mode = LossMode::ATDL;
  double adaptive_a = 0.5;
  double learning_rate = 1e-3;
  double momentum_beta1 = 0.9;
  double momentum_beta2 = 0.999;
  int batch_size = 8;
  int epochs = 50;
  std::uint64_t seed = 0;
  bool use_reslice_augment = true;
  double reslice_spacing_mm = 0.1;
  /// Samples per epoch drawn from the resliced pool; 0 = number of original labeled slices.
  int reslice_epoch_cap = 0;
  WeightUpdate weight_update = WeightUpdate::PerBatch;
  AugmentPolicy augment;
  Artery artery = Artery::CCA;
};

void validate_train_config(const TrainConfig& c);

struct CohortConfig {
  int n_volumes = 20;
  std::uint64_t seed = 2021;
};

struct PathConfig {
  std::string data_root = "data/cohort";
  std::string results_root = "results";
};

struct MatrixConfig {
  std::vector<Artery> arteries{Artery::CCA};
};

/// Everything a CLI run needs, serialized as one JSON document.
struct RunConfig {
  PhantomSpec phantom;
  CohortConfig cohort;
  NetConfig net;
  TrainConfig train;
  SegmentOptions segment;
  PathConfig paths;
  MatrixConfig matrix;
};

nlohmann::json to_json(const RunConfig& c);
nlohmann::json to_json(const NetConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const PhantomSpec& c);
nlohmann::json to_json(const AugmentPolicy& c);

/// Parses a (possibly partial) document over the defaults. Unknown keys and
/// wrongly typed values throw ArgumentError naming the offending key.
RunConfig run_config_from_json(const nlohmann::json& j);
NetConfig net_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

/// Stable 64-bit FNV-1a digest of a JSON document's compact form, as hex.
std::string config_hash(const nlohmann::json& j);

}  // namespace carotid
