#pragma once

#include "carotid/grid.hpp"

namespace carotid {

/// Per-pixel probabilities of lying inside the MAB and inside the LIB.
struct ProbabilityPair {
  Grid<float> mab;
  Grid<float> lib;
};

/// Vessel-wall probability: max(mab - lib, 0) pixel-wise.
Grid<float> derive_cvw(const ProbabilityPair& pair);

}  // namespace carotid
