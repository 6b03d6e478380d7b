#pragma once

#include <optional>

#include <torch/torch.h>

#include "carotid/loss_schedule.hpp"

namespace carotid {

/// Stabilizer added to the overlap term and the denominator of the Dice loss.
inline constexpr double kDiceEpsilon = 1e-6;

/// Soft Dice loss per sample: 1 - (2 sum(y*p) + eps) / (sum(y) + sum(p) + eps),
/// summed over every dimension after the first. Returns shape [N].
/// Empty target with empty prediction gives 0.
torch::Tensor dice_loss(const torch::Tensor& pred, const torch::Tensor& target);

/// Batch-mean Dice losses of the three regions.
struct ComponentLosses {
  torch::Tensor mab;
  torch::Tensor lib;
  torch::Tensor cvw;
};

/// `pred` and `target` are [N,2,H,W] (MAB, LIB). The wall prediction is
/// relu(mab - lib) and the wall target is MAB minus LIB.
ComponentLosses component_losses(const torch::Tensor& pred, const torch::Tensor& target);

struct ObjectiveResult {
  torch::Tensor total;
  LossWeights weights;
  double loss_mab = 0;
  double loss_lib = 0;
  double loss_cvw = 0;
};

/// Weighted sum with constant weights (no gradient flows through them).
ObjectiveResult weighted_objective(const torch::Tensor& pred, const torch::Tensor& target,
                                   const LossWeights& weights);

/// SDL/DDL: 1/2 MAB + 1/2 LIB. TDL: uniform thirds. ATDL: uniform in the first
/// half of training, otherwise weights from the current batch's detached MAB and
/// LIB losses. ATDL without a schedule state throws ArgumentError.
ObjectiveResult objective(const torch::Tensor& pred, const torch::Tensor& target, LossMode mode,
                          const std::optional<ScheduleState>& state);

}  // namespace carotid
