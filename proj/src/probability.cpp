#include "carotid/probability.hpp"

#include <algorithm>

namespace carotid {

Grid<float> derive_cvw(const ProbabilityPair& pair) {
  require_same_shape(pair.mab, pair.lib, "derive_cvw: MAB/LIB maps differ in size");
  Grid<float> out(pair.mab.rows(), pair.mab.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values()[i] = std::max(pair.mab.values()[i] - pair.lib.values()[i], 0.0f);
  }
  return out;
}

}  // namespace carotid
