// Statistical helpers for tests: goodness-of-fit p-values computed on the
// test side, independent of the library under test.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace teststats {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Upper-tail chi-square p-value via the Wilson-Hilferty cube-root normal
// approximation; plenty accurate for the dof used here (>= 5).
inline double chi_square_p(double stat, int dof) {
  const double k = double(dof);
  const double z = (std::cbrt(stat / k) - (1.0 - 2.0 / (9.0 * k))) / std::sqrt(2.0 / (9.0 * k));
  return 1.0 - normal_cdf(z);
}

// Chi-square statistic for observed counts against equal expected counts.
inline double chi_square_uniform(const std::vector<int>& counts, double& stat) {
  std::size_t total = 0;
  for (int c : counts) total += std::size_t(c);
  const double expected = double(total) / double(counts.size());
  stat = 0;
  for (int c : counts) {
    const double d = double(c) - expected;
    stat += d * d / expected;
  }
  return chi_square_p(stat, int(counts.size()) - 1);
}

inline double chi_square_uniform(const std::vector<int>& counts) {
  double stat = 0;
  return chi_square_uniform(counts, stat);
}

// Kolmogorov-Smirnov p-value for samples against the uniform CDF on [lo, hi].
inline double ks_uniform_p(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = double(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = (xs[i] - lo) / (hi - lo);
    d = std::max(d, std::abs(cdf - double(i) / n));
    d = std::max(d, std::abs(double(i + 1) / n - cdf));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

// |observed - n p| in units of the binomial standard deviation.
inline double binomial_z(std::size_t observed, std::size_t n, double p) {
  const double mu = double(n) * p;
  const double sd = std::sqrt(double(n) * p * (1.0 - p));
  return (double(observed) - mu) / sd;
}

}  // namespace teststats
