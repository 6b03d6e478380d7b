#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace carotid::stats {

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> v);

struct Correlation {
  double r = 0;
  double p = 1;  ///< two-sided, t distribution with n - 2 degrees of freedom
  std::size_t n = 0;
};

/// Throws std::invalid_argument on length mismatch, n < 3 or zero variance.
Correlation pearson(std::span<const double> x, std::span<const double> y);

struct BlandAltman {
  double bias = 0;
  double sd = 0;
  double loa_low = 0;
  double loa_high = 0;
  std::size_t n = 0;
};

/// Differences a - b; limits of agreement bias +/- 1.96 sd.
BlandAltman bland_altman(std::span<const double> a, std::span<const double> b);

/// P(Q <= q) for the studentized range of k means with `df` error degrees of
/// freedom (df <= 0 means infinite), by nested Gauss-Kronrod quadrature.
double studentized_range_cdf(double q, int k, double df);

struct TukeyPair {
  std::string group_a;
  std::string group_b;
  double mean_diff = 0;  ///< mean(a) - mean(b)
  double q = 0;
  double p = 1;
};

struct TukeyResult {
  std::vector<TukeyPair> pairs;
  double mse = 0;
  double df = 0;
  int k = 0;
};

/// One-way Tukey HSD (Tukey-Kramer for unequal sizes) over all group pairs in
/// map order. Pooled variance is floored at 1e-12.
TukeyResult tukey_hsd(const std::map<std::string, std::vector<double>>& groups);

/// Looks up the pair regardless of order; throws std::out_of_range if absent.
const TukeyPair& find_pair(const TukeyResult& result, const std::string& a, const std::string& b);

}  // namespace carotid::stats
