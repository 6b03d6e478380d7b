#include "carotid/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "carotid/errors.hpp"

namespace carotid::stats {

double mean(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) throw ArgumentError("sample sd needs at least 2 values");
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson: length mismatch");
  if (x.size() < 3) throw ArgumentError("pearson: need at least 3 pairs");
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) throw ArgumentError("pearson: zero variance");
  Correlation c;
  c.n = x.size();
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = static_cast<double>(c.n - 2);
  if (std::abs(c.r) >= 1.0) {
    c.p = 0.0;
  } else {
    const double t = c.r * std::sqrt(dof / (1 - c.r * c.r));
    boost::math::students_t dist(dof);
    c.p = std::clamp(2 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  return c;
}

BlandAltman bland_altman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("bland_altman: length mismatch");
  if (a.size() < 3) throw ArgumentError("bland_altman: need at least 3 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  BlandAltman ba;
  ba.n = d.size();
  ba.bias = mean(d);
  ba.sd = sample_sd(d);
  ba.loa_low = ba.bias - 1.96 * ba.sd;
  ba.loa_high = ba.bias + 1.96 * ba.sd;
  return ba;
}

// ---------------------------------------------------------------------------

namespace {

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * M_PI); }
inline double Phi(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

// P(range of k iid standard normals <= w).
double range_cdf(double w, int k) {
  if (w <= 0) return 0.0;
  auto f = [w, k](double z) {
    const double inner = Phi(z) - Phi(z - w);
    return phi(z) * std::pow(std::max(inner, 0.0), k - 1);
  };
  // phi(z) vanishes outside [-9, 9]; a wider interval lets the adaptive rule
  // miss the mass entirely when w is huge.
  using boost::math::quadrature::gauss_kronrod;
  const double v = k * gauss_kronrod<double, 31>::integrate(f, -9.0, 9.0, 15, 1e-12);
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

double studentized_range_cdf(double q, int k, double df) {
  if (k < 2) throw ArgumentError("studentized range needs k >= 2");
  if (q <= 0) return 0.0;
  if (df <= 0 || std::isinf(df)) return range_cdf(q, k);
  // Density of s = sqrt(chi2_df / df), evaluated in log space.
  const double log_norm = 0.5 * df * std::log(df) - boost::math::lgamma(0.5 * df) -
                          (0.5 * df - 1) * std::log(2.0);
  auto integrand = [&](double s) {
    if (s <= 0) return 0.0;
    const double log_f = log_norm + (df - 1) * std::log(s) - 0.5 * df * s * s;
    return std::exp(log_f) * range_cdf(q * s, k);
  };
  // The scaled chi density is negligible beyond 2 + 12/sqrt(df); split at
  // its mode so the adaptive rule sees one smooth hump per side.
  const double upper = 2.0 + 12.0 / std::sqrt(df);
  const double mode = std::sqrt(std::max(df - 1, 0.0) / df);
  using boost::math::quadrature::gauss_kronrod;
  double v = gauss_kronrod<double, 31>::integrate(integrand, mode, upper, 15, 1e-10);
  if (mode > 0) v += gauss_kronrod<double, 31>::integrate(integrand, 0.0, mode, 15, 1e-10);
  return std::clamp(v, 0.0, 1.0);
}

TukeyResult tukey_hsd(const std::map<std::string, std::vector<double>>& groups) {
  if (groups.size() < 2) throw ArgumentError("tukey_hsd needs at least 2 groups");
  std::size_t n_total = 0;
  double ssw = 0;
  std::map<std::string, double> means;
  for (const auto& [name, values] : groups) {
    if (values.size() < 2) throw ArgumentError("tukey_hsd: group '" + name + "' has < 2 values");
    const double m = mean(values);
    means[name] = m;
    for (double v : values) ssw += (v - m) * (v - m);
    n_total += values.size();
  }
  TukeyResult res;
  res.k = static_cast<int>(groups.size());
  res.df = static_cast<double>(n_total - groups.size());
  res.mse = std::max(ssw / res.df, 1e-12);
  for (auto a = groups.begin(); a != groups.end(); ++a) {
    for (auto b = std::next(a); b != groups.end(); ++b) {
      TukeyPair p;
      p.group_a = a->first;
      p.group_b = b->first;
      p.mean_diff = means[a->first] - means[b->first];
      const double se = std::sqrt(0.5 * res.mse *
                                  (1.0 / a->second.size() + 1.0 / b->second.size()));
      p.q = std::abs(p.mean_diff) / se;
      p.p = std::clamp(1.0 - studentized_range_cdf(p.q, res.k, res.df), 0.0, 1.0);
      res.pairs.push_back(p);
    }
  }
  return res;
}

const TukeyPair& find_pair(const TukeyResult& result, const std::string& a, const std::string& b) {
  for (const auto& p : result.pairs) {
    if ((p.group_a == a && p.group_b == b) || (p.group_a == b && p.group_b == a)) return p;
  }
  throw std::out_of_range("no Tukey pair " + a + " / " + b);
}

}  // namespace carotid::stats
