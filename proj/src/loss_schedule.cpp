#include "carotid/loss_schedule.hpp"

#include <algorithm>
#include <cmath>

#include "carotid/errors.hpp"

namespace carotid {

const char* to_string(LossMode m) {
  switch (m) {
    case LossMode::SDL: return "SDL";
    case LossMode::DDL: return "DDL";
    case LossMode::TDL: return "TDL";
    case LossMode::ATDL: return "ATDL";
  }
  return "?";
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "SDL" || s == "sdl") return LossMode::SDL;
  if (s == "DDL" || s == "ddl") return LossMode::DDL;
  if (s == "TDL" || s == "tdl") return LossMode::TDL;
  if (s == "ATDL" || s == "atdl") return LossMode::ATDL;
  throw ArgumentError("unknown loss mode '" + s + "'");
}

void validate_weights(const LossWeights& w, double tol) {
  if (w.alpha < 0 || w.beta < 0 || w.gamma < 0) throw ArgumentError("negative loss weight");
  if (std::abs(w.alpha + w.beta + w.gamma - 1.0) > tol) {
    throw ArgumentError("loss weights do not sum to 1");
  }
}

LossWeights atdl_weights(double loss_mab, double loss_lib, double a) {
  if (!(a > 0)) throw ArgumentError("adaptive parameter a must be > 0");
  // Float round-off can push a Dice loss a hair outside [0,1].
  auto clamp_loss = [](double l) {
    if (!(l >= -1e-6 && l <= 1 + 1e-6)) throw ArgumentError("Dice loss outside [0,1]");
    return std::clamp(l, 0.0, 1.0);
  };
  loss_mab = clamp_loss(loss_mab);
  loss_lib = clamp_loss(loss_lib);
  auto weight = [a](double l) { return l / (3.0 * (1.0 + a * (1.0 - l))); };
  LossWeights w;
  w.alpha = weight(loss_mab);
  w.beta = weight(loss_lib);
  w.gamma = 1.0 - w.alpha - w.beta;
  return w;
}

bool in_uniform_phase(const ScheduleState& state) {
  return state.epoch < (state.total_epochs + 1) / 2;
}

LossWeights fixed_weights(LossMode mode) {
  switch (mode) {
    case LossMode::SDL:
    case LossMode::DDL: return {0.5, 0.5, 0.0};
    case LossMode::TDL:
    case LossMode::ATDL: return LossWeights::uniform();
  }
  return LossWeights::uniform();
}

LossWeights schedule_weights(const ScheduleState& state, double loss_mab, double loss_lib) {
  if (state.total_epochs < 1 || state.epoch < 0 || state.epoch >= state.total_epochs) {
    throw ArgumentError("schedule epoch outside [0, total_epochs)");
  }
  if (in_uniform_phase(state)) return LossWeights::uniform();
  return atdl_weights(loss_mab, loss_lib, state.adaptive_a);
}

}  // namespace carotid
