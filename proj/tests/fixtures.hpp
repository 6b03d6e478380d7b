#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "carotid/grid.hpp"
#include "carotid/volume_io.hpp"

namespace fixtures {

using carotid::Image;
using carotid::Mask;

// Pixel (r, c) is inside when its center is within `radius` of (cr, cc).
inline Mask disk(int rows, int cols, double cr, double cc, double radius) {
  Mask m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius) m(r, c) = 1;
  return m;
}

inline Mask ellipse(int rows, int cols, double cr, double cc, double ry, double rx) {
  Mask m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double u = (r - cr) / ry, v = (c - cc) / rx;
      if (u * u + v * v <= 1.0) m(r, c) = 1;
    }
  return m;
}

inline Mask rect(int rows, int cols, int r0, int c0, int r1, int c1) {
  Mask m(rows, cols);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) m(r, c) = 1;
  return m;
}

inline Image random_image(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Image im(rows, cols);
  for (auto& v : im.values()) v = u(rng);
  return im;
}

inline Mask random_mask(int rows, int cols, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution b(p);
  Mask m(rows, cols);
  for (auto& v : m.values()) v = b(rng);
  return m;
}

inline carotid::LabelPair annulus(int rows, int cols, double cr, double cc, double r_mab,
                                  double r_lib, int slice = 0) {
  return {disk(rows, cols, cr, cc, r_mab), disk(rows, cols, cr, cc, r_lib), slice};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("carotid_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
