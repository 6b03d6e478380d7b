#include "carotid/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace carotid {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void validate_phantom_spec(const PhantomSpec& s) {
  auto fail = [](const char* msg) { throw ArgumentError(std::string("phantom spec: ") + msg); };
  if (s.n_slices < 1) fail("n_slices must be >= 1");
  if (s.rows < 8 || s.cols < 8) fail("image size must be at least 8x8");
  if (s.mab_radius.min <= 0 || s.mab_radius.min > s.mab_radius.max) fail("bad mab_radius range");
  if (s.wall_thickness.min < 1 || s.wall_thickness.min > s.wall_thickness.max) {
    fail("wall thickness min must be >= 1 px");
  }
  if (s.ellipticity.min < 1 || s.ellipticity.min > s.ellipticity.max) {
    fail("ellipticity range must satisfy 1 <= min <= max");
  }
  const double min_minor_axis = s.mab_radius.min / std::sqrt(s.ellipticity.max);
  if (min_minor_axis - s.wall_thickness.max < 2.0) fail("LIB radius could drop below 2 px");
  if (s.speckle_strength < 0) fail("speckle_strength must be >= 0");
  if (s.shadow_probability < 0 || s.shadow_probability > 1) fail("shadow_probability not in [0,1]");
  if (s.centerline_drift_amplitude < 0) fail("drift amplitude must be >= 0");
  if (s.slice_spacing <= 0 || s.in_plane_spacing.x <= 0 || s.in_plane_spacing.y <= 0) {
    fail("spacings must be positive");
  }
  const double max_major = s.mab_radius.max * std::sqrt(s.ellipticity.max);
  if (2 * (max_major + s.centerline_drift_amplitude) + 2 > std::min(s.rows, s.cols)) {
    fail("vessel does not fit inside the image");
  }
}

namespace {

// Smooth bounded random walk: reflected Gaussian steps followed by a 5-tap
// binomial blur, so neighbouring slices differ by a fraction of the range.
std::vector<double> smooth_walk(std::mt19937_64& rng, int n, Range range) {
  std::vector<double> v(static_cast<std::size_t>(n));
  const double width = range.max - range.min;
  std::uniform_real_distribution<double> start(range.min, range.max);
  std::normal_distribution<double> step(0.0, 0.08 * width);
  double x = width > 0 ? start(rng) : range.min;
  for (int i = 0; i < n; ++i) {
    v[i] = x;
    if (width > 0) {
      x += step(rng);
      if (x < range.min) x = 2 * range.min - x;
      if (x > range.max) x = 2 * range.max - x;
      x = std::clamp(x, range.min, range.max);
    }
  }
  if (n < 3 || width <= 0) return v;
  static constexpr double kTaps[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  std::vector<double> out(v.size());
  for (int i = 0; i < n; ++i) {
    double acc = 0;
    for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * v[std::clamp(i + k, 0, n - 1)];
    out[i] = acc;
  }
  return out;
}

struct EllipseSlice {
  double cy, cx;   // center (row, col)
  double a, b;     // MAB semi-axes along the rotated (u, v) frame
  double wall;     // thickness in px
  double angle;    // radians
};

// Normalized ellipse radius of pixel center (r, c); <= 1 means inside.
double ellipse_level(const EllipseSlice& e, double a, double b, int r, int c) {
  const double dy = r - e.cy;
  const double dx = c - e.cx;
  const double u = dx * std::cos(e.angle) + dy * std::sin(e.angle);
  const double v = -dx * std::sin(e.angle) + dy * std::cos(e.angle);
  return (u * u) / (a * a) + (v * v) / (b * b);
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  validate_phantom_spec(spec);
  std::mt19937_64 rng(spec.seed);
  const int n = spec.n_slices;

  const double amp = spec.centerline_drift_amplitude;
  const auto drift_y = smooth_walk(rng, n, {-amp, amp});
  const auto drift_x = smooth_walk(rng, n, {-amp, amp});
  const auto radius = smooth_walk(rng, n, spec.mab_radius);
  const auto wall = smooth_walk(rng, n, spec.wall_thickness);
  const auto ellip = smooth_walk(rng, n, spec.ellipticity);
  std::uniform_real_distribution<double> angle_dist(0.0, std::numbers::pi);
  const double angle = angle_dist(rng);

  // Stable tissue texture shared by all slices keeps the phantom coherent along z.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double tissue_level = 0.40 + 0.1 * unit(rng);

  Phantom out;
  Volume& vol = out.volume;
  vol.in_plane_spacing = spec.in_plane_spacing;
  vol.slice_spacing = spec.slice_spacing;
  vol.slice_axis_label = "axial";

  // Rayleigh(sigma) has mean sigma*sqrt(pi/2); pick sigma for unit mean.
  const double rayleigh_sigma = std::sqrt(2.0 / std::numbers::pi);
  constexpr double kLumen = 0.08;
  constexpr double kWall = 0.85;

  for (int s = 0; s < n; ++s) {
    EllipseSlice e;
    e.cy = (spec.rows - 1) / 2.0 + drift_y[s];
    e.cx = (spec.cols - 1) / 2.0 + drift_x[s];
    e.a = radius[s] * std::sqrt(ellip[s]);
    e.b = radius[s] / std::sqrt(ellip[s]);
    e.wall = wall[s];
    e.angle = angle;
    const double la = e.a - e.wall;
    const double lb = e.b - e.wall;

    Image img(spec.rows, spec.cols);
    LabelPair lp{Mask(spec.rows, spec.cols), Mask(spec.rows, spec.cols), s};
    for (int r = 0; r < spec.rows; ++r) {
      for (int c = 0; c < spec.cols; ++c) {
        const bool in_mab = ellipse_level(e, e.a, e.b, r, c) <= 1.0;
        const bool in_lib = ellipse_level(e, la, lb, r, c) <= 1.0;
        lp.mab(r, c) = in_mab;
        lp.lib(r, c) = in_lib;
        double base = in_lib ? kLumen : in_mab ? kWall : tissue_level;
        if (spec.speckle_strength > 0) {
          const double u = std::max(unit(rng), 1e-12);
          const double rayleigh = rayleigh_sigma * std::sqrt(-2.0 * std::log(u));
          base *= 1.0 + spec.speckle_strength * (rayleigh - 1.0);
        }
        img(r, c) = static_cast<float>(std::clamp(base, 0.0, 1.0));
      }
    }

    if (spec.shadow_probability > 0 && unit(rng) < spec.shadow_probability) {
      const int width = std::max(4, static_cast<int>(spec.cols * (0.04 + 0.08 * unit(rng))));
      const int start = static_cast<int>(unit(rng) * (spec.cols - width));
      const double atten = 0.3 + 0.3 * unit(rng);
      for (int r = 0; r < spec.rows; ++r) {
        for (int c = start; c < start + width; ++c) img(r, c) = static_cast<float>(img(r, c) * atten);
      }
    }

    // Quantize to what the 8-bit on-disk format can hold.
    for (float& v : img.values()) v = std::lround(v * 255.0f) / 255.0f;
    vol.slices.push_back(std::move(img));
    out.labels.push_back(std::move(lp));
  }

  if (spec.write_roi && n >= 2) {
    auto bbox = [&](const Mask& m, int slice) {
      int r0 = m.rows(), c0 = m.cols(), r1 = -1, c1 = -1;
      for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
          if (!m(r, c)) continue;
          r0 = std::min(r0, r);
          c0 = std::min(c0, c);
          r1 = std::max(r1, r);
          c1 = std::max(c1, c);
        }
      }
      RoiBox b{{r0, c0}, {r1 + 1, c1 + 1}, slice};
      return expand_roi(b, 5, m.rows(), m.cols());
    };
    vol.roi_first = bbox(out.labels.front().mab, 0);
    vol.roi_last = bbox(out.labels.back().mab, n - 1);
  }
  return out;
}

std::vector<CohortEntry> generate_cohort(int n_volumes, const PhantomSpec& spec_template,
                                         std::uint64_t seed, const std::filesystem::path& root) {
  if (n_volumes < 1) throw ArgumentError("generate_cohort needs n_volumes >= 1");
  validate_phantom_spec(spec_template);
  std::vector<CohortEntry> entries;
  for (int i = 0; i < n_volumes; ++i) {
    PhantomSpec spec = spec_template;
    spec.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    Phantom ph = generate_phantom(spec);
    char vol_id[32];
    char subj_id[32];
    std::snprintf(vol_id, sizeof vol_id, "vol_%03d", i);
    std::snprintf(subj_id, sizeof subj_id, "subj_%03d", i / 2);
    save_volume(image_dir(root, vol_id), ph.volume);
    save_labels(label_dir(root, vol_id), ph.labels);
    entries.push_back({vol_id, subj_id});
  }
  save_cohort(root, entries);
  return entries;
}

}  // namespace carotid
