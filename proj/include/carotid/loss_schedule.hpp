#pragma once

#include <string>

namespace carotid {

/// Training objectives: single (two one-channel nets), double, triple and
/// adaptive triple Dice loss.
enum class LossMode { SDL, DDL, TDL, ATDL };
const char* to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

/// Weights of the MAB, LIB and vessel-wall Dice terms.
struct LossWeights {
  double alpha = 1.0 / 3;
  double beta = 1.0 / 3;
  double gamma = 1.0 / 3;

  static LossWeights uniform() { return {}; }
};

/// Throws ArgumentError unless all weights are >= 0 and sum to 1 within `tol`.
void validate_weights(const LossWeights& w, double tol = 1e-9);

struct ScheduleState {
  int epoch = 0;
  int total_epochs = 1;
  double adaptive_a = 0.5;
};

/// Adaptive weights from the current MAB and LIB Dice losses:
///   alpha = L1 / (3 (1 + a (1 - L1))),  beta = L2 / (3 (1 + a (1 - L2))),
///   gamma = 1 - alpha - beta.
/// alpha and beta rise monotonically from 0 to 1/3 over [0, 1].
LossWeights atdl_weights(double loss_mab, double loss_lib, double a);

/// Epochs [0, ceil(E/2)) use uniform weights; later epochs are adaptive.
bool in_uniform_phase(const ScheduleState& state);

/// Fixed weights of the non-adaptive modes. SDL and DDL use (1/2, 1/2, 0):
/// for SDL the two halves drive disjoint parameter sets.
LossWeights fixed_weights(LossMode mode);

/// Weights an ATDL step uses given the detached component losses.
LossWeights schedule_weights(const ScheduleState& state, double loss_mab, double loss_lib);

}  // namespace carotid
