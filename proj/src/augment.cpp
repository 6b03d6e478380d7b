#include "carotid/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace carotid {

void validate_policy(const AugmentPolicy& p) {
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(p.p_hflip) || !prob(p.p_vflip)) throw ArgumentError("flip probabilities not in [0,1]");
  if (!prob(p.max_translate_frac)) throw ArgumentError("max_translate_frac not in [0,1]");
  if (p.max_rotate_deg < 0) throw ArgumentError("max_rotate_deg must be >= 0");
}

namespace {

struct RotationFrame {
  double cy, cx, cos_t, sin_t;
  RotationFrame(int rows, int cols, double degrees)
      : cy((rows - 1) / 2.0),
        cx((cols - 1) / 2.0),
        cos_t(std::cos(degrees * std::numbers::pi / 180.0)),
        sin_t(std::sin(degrees * std::numbers::pi / 180.0)) {}
  // Inverse map: destination pixel -> source coordinate.
  std::pair<double, double> source(int r, int c) const {
    const double dy = r - cy;
    const double dx = c - cx;
    return {cy + cos_t * dy - sin_t * dx, cx + sin_t * dy + cos_t * dx};
  }
};

}  // namespace

Image rotate(const Image& image, double degrees) {
  if (degrees == 0.0) return image;
  const RotationFrame f(image.rows(), image.cols(), degrees);
  Image out(image.rows(), image.cols());
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      auto [y, x] = f.source(r, c);
      const int y0 = static_cast<int>(std::floor(y));
      const int x0 = static_cast<int>(std::floor(x));
      const double fy = y - y0;
      const double fx = x - x0;
      auto at = [&](int rr, int cc) -> double {
        return image.contains(rr, cc) ? image(rr, cc) : 0.0;
      };
      const double v = (at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx) * (1 - fy) +
                       (at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx) * fy;
      out(r, c) = static_cast<float>(v);
    }
  }
  return out;
}

Mask rotate(const Mask& mask, double degrees) {
  if (degrees == 0.0) return mask;
  const RotationFrame f(mask.rows(), mask.cols(), degrees);
  Mask out(mask.rows(), mask.cols());
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      auto [y, x] = f.source(r, c);
      const int yi = static_cast<int>(std::lround(y));
      const int xi = static_cast<int>(std::lround(x));
      if (mask.contains(yi, xi)) out(r, c) = mask(yi, xi);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = 1e20;
constexpr double kBound = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) for squared EDT.
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  int k = 0;
  v[0] = 0;
  z[0] = -kBound;
  z[1] = kBound;
  auto intersect = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kBound;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Squared distance from every pixel to the nearest pixel where `target(r,c)` holds.
Grid<double> squared_edt(const Mask& mask, bool to_foreground) {
  const int rows = mask.rows();
  const int cols = mask.cols();
  Grid<double> g(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) g(r, c) = (mask(r, c) != 0) == to_foreground ? 0.0 : kInf;

  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(static_cast<std::size_t>(std::max(rows, cols)));
  std::vector<double> d(f.size());
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) f[r] = g(r, c);
    edt_1d(f.data(), d.data(), rows, v, z);
    for (int r = 0; r < rows; ++r) g(r, c) = d[r];
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) f[c] = g(r, c);
    edt_1d(f.data(), d.data(), cols, v, z);
    for (int c = 0; c < cols; ++c) g(r, c) = d[c];
  }
  return g;
}

}  // namespace

Grid<float> signed_distance(const Mask& mask) {
  const auto to_bg = squared_edt(mask, false);
  const auto to_fg = squared_edt(mask, true);
  const double cap = static_cast<double>(mask.rows() + mask.cols());
  Grid<float> out(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool inside = mask.values()[i] != 0;
    const double d = std::min(std::sqrt(inside ? to_bg.values()[i] : to_fg.values()[i]), cap);
    out.values()[i] = static_cast<float>(inside ? d - 0.5 : -(d - 0.5));
  }
  return out;
}

ReslicedStack shape_interp_reslice(const Volume& volume, const std::vector<LabelPair>& labels,
                                   double target_spacing) {
  if (labels.size() < 2) throw ArgumentError("shape interpolation needs >= 2 labeled slices");
  if (!(target_spacing > 0) || target_spacing > volume.slice_spacing + 1e-12) {
    throw ArgumentError("target spacing must be positive and not exceed the slice spacing");
  }
  std::vector<const LabelPair*> by_slice;
  for (const auto& lp : labels) by_slice.push_back(&lp);
  std::sort(by_slice.begin(), by_slice.end(),
            [](auto* a, auto* b) { return a->slice_index < b->slice_index; });
  const int first = by_slice.front()->slice_index;
  const int last = by_slice.back()->slice_index;
  if (last - first + 1 != static_cast<int>(by_slice.size())) {
    throw ArgumentError("labeled slices must be contiguous (unlabeled intermediate slice)");
  }
  if (first < 0 || last >= volume.n_slices()) throw ArgumentError("label slice index out of range");

  std::vector<Grid<float>> sdf_mab;
  std::vector<Grid<float>> sdf_lib;
  for (const auto* lp : by_slice) {
    validate_label_pair(*lp);
    require_same_shape(lp->mab, volume.slices[lp->slice_index], "label/image size mismatch");
    sdf_mab.push_back(signed_distance(lp->mab));
    sdf_lib.push_back(signed_distance(lp->lib));
  }

  ReslicedStack out;
  out.volume.in_plane_spacing = volume.in_plane_spacing;
  out.volume.slice_spacing = target_spacing;
  out.volume.slice_axis_label = volume.slice_axis_label;

  const double ratio = volume.slice_spacing / target_spacing;
  const int n_out = static_cast<int>(std::floor((last - first) * ratio + 1e-9)) + 1;
  const int rows = volume.rows();
  const int cols = volume.cols();
  for (int k = 0; k < n_out; ++k) {
    const double t = k / ratio;
    int i = static_cast<int>(std::floor(t + 1e-9));
    double w = t - i;
    if (w < 1e-9) w = 0.0;
    if (i >= last - first) {
      i = last - first;
      w = 0.0;
    }
    LabelPair lp{Mask(rows, cols), Mask(rows, cols), k};
    Image img(rows, cols);
    if (w == 0.0) {
      img = volume.slices[first + i];
      lp.mab = by_slice[i]->mab;
      lp.lib = by_slice[i]->lib;
    } else {
      const auto& a = volume.slices[first + i].values();
      const auto& b = volume.slices[first + i + 1].values();
      for (std::size_t p = 0; p < img.size(); ++p) {
        img.values()[p] = static_cast<float>((1 - w) * a[p] + w * b[p]);
        const double m = (1 - w) * sdf_mab[i].values()[p] + w * sdf_mab[i + 1].values()[p];
        const double l = (1 - w) * sdf_lib[i].values()[p] + w * sdf_lib[i + 1].values()[p];
        lp.mab.values()[p] = m > 0.0;
        lp.lib.values()[p] = l > 0.0 && m > 0.0;
      }
    }
    out.volume.slices.push_back(std::move(img));
    out.labels.push_back(std::move(lp));
  }
  return out;
}

// ---------------------------------------------------------------------------

AugmentDraw draw_augment(const AugmentPolicy& policy, int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u_h = unit(rng);
  const double u_v = unit(rng);
  const double u_tx = unit(rng);
  const double u_ty = unit(rng);
  const double u_rot = unit(rng);

  AugmentDraw d;
  d.hflip = u_h < policy.p_hflip;
  d.vflip = u_v < policy.p_vflip;
  // Literal reading of the published ranges: the x shift is bounded by a
  // fraction of the height and the y shift by a fraction of the width.
  const double max_tx = policy.max_translate_frac * rows;
  const double max_ty = policy.max_translate_frac * cols;
  if (policy.symmetric_translation) {
    d.shift_cols = static_cast<int>(std::lround((2 * u_tx - 1) * max_tx));
    d.shift_rows = static_cast<int>(std::lround((2 * u_ty - 1) * max_ty));
  } else {
    d.shift_cols = static_cast<int>(std::lround(u_tx * max_tx));
    d.shift_rows = static_cast<int>(std::lround(u_ty * max_ty));
  }
  d.degrees = (2 * u_rot - 1) * policy.max_rotate_deg;
  return d;
}

std::pair<Image, LabelPair> apply_augment(const Image& image, const LabelPair& labels,
                                          const AugmentDraw& d) {
  require_same_shape(image, labels.mab, "image and MAB mask differ in size");
  require_same_shape(image, labels.lib, "image and LIB mask differ in size");
  Image img = image;
  Mask mab = labels.mab;
  Mask lib = labels.lib;
  if (d.hflip) img = hflip(img), mab = hflip(mab), lib = hflip(lib);
  if (d.vflip) img = vflip(img), mab = vflip(mab), lib = vflip(lib);
  if (d.shift_rows != 0 || d.shift_cols != 0) {
    img = translate(img, d.shift_rows, d.shift_cols);
    mab = translate(mab, d.shift_rows, d.shift_cols);
    lib = translate(lib, d.shift_rows, d.shift_cols);
  }
  if (d.degrees != 0.0) {
    img = rotate(img, d.degrees);
    mab = rotate(mab, d.degrees);
    lib = rotate(lib, d.degrees);
  }
  return {std::move(img), LabelPair{std::move(mab), std::move(lib), labels.slice_index}};
}

std::pair<Image, LabelPair> augment_sample(const Image& image, const LabelPair& labels,
                                           const AugmentPolicy& policy, std::mt19937_64& rng) {
  return apply_augment(image, labels, draw_augment(policy, image.rows(), image.cols(), rng));
}

}  // namespace carotid
