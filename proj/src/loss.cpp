#include "carotid/loss.hpp"

#include "carotid/errors.hpp"

namespace carotid {

torch::Tensor dice_loss(const torch::Tensor& pred, const torch::Tensor& target) {
  if (!pred.sizes().equals(target.sizes())) throw ShapeError("dice_loss: shape mismatch");
  if (pred.dim() < 1) throw ShapeError("dice_loss: needs a batch dimension");
  const auto p = pred.flatten(1);
  const auto y = target.to(pred.dtype()).flatten(1);
  const auto overlap = (p * y).sum(1);
  const auto denom = p.sum(1) + y.sum(1);
  return 1.0 - (2.0 * overlap + kDiceEpsilon) / (denom + kDiceEpsilon);
}

ComponentLosses component_losses(const torch::Tensor& pred, const torch::Tensor& target) {
  if (pred.dim() != 4 || pred.size(1) != 2 || !pred.sizes().equals(target.sizes())) {
    throw ShapeError("component_losses expects matching [N,2,H,W] tensors");
  }
  const auto p_mab = pred.select(1, 0);
  const auto p_lib = pred.select(1, 1);
  const auto y_mab = target.select(1, 0).to(pred.dtype());
  const auto y_lib = target.select(1, 1).to(pred.dtype());
  const auto p_cvw = torch::relu(p_mab - p_lib);
  const auto y_cvw = torch::clamp_min(y_mab - y_lib, 0.0);
  return {dice_loss(p_mab, y_mab).mean(), dice_loss(p_lib, y_lib).mean(),
          dice_loss(p_cvw, y_cvw).mean()};
}

ObjectiveResult weighted_objective(const torch::Tensor& pred, const torch::Tensor& target,
                                   const LossWeights& weights) {
  const auto c = component_losses(pred, target);
  ObjectiveResult r;
  r.weights = weights;
  r.loss_mab = c.mab.item<double>();
  r.loss_lib = c.lib.item<double>();
  r.loss_cvw = c.cvw.item<double>();
  r.total = weights.alpha * c.mab + weights.beta * c.lib;
  if (weights.gamma != 0.0) r.total = r.total + weights.gamma * c.cvw;
  return r;
}

ObjectiveResult objective(const torch::Tensor& pred, const torch::Tensor& target, LossMode mode,
                          const std::optional<ScheduleState>& state) {
  if (mode != LossMode::ATDL) return weighted_objective(pred, target, fixed_weights(mode));
  if (!state) throw ArgumentError("ATDL objective requires a schedule state");
  if (in_uniform_phase(*state)) return weighted_objective(pred, target, LossWeights::uniform());

  const auto c = component_losses(pred, target);
  const double l_mab = c.mab.item<double>();
  const double l_lib = c.lib.item<double>();
  ObjectiveResult r;
  r.weights = schedule_weights(*state, l_mab, l_lib);
  r.loss_mab = l_mab;
  r.loss_lib = l_lib;
  r.loss_cvw = c.cvw.item<double>();
  r.total = r.weights.alpha * c.mab + r.weights.beta * c.lib + r.weights.gamma * c.cvw;
  return r;
}

}  // namespace carotid
