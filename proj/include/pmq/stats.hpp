#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "pmq/special_functions.hpp"

namespace pmq {

/// Neumaier compensated summation; order-sensitive, so callers that need
/// bit-identical parallel results must feed it in a fixed order.
inline double neumaier_sum(std::span<const double> xs) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

struct summary_stats {
  double mean = 0.0;
  double variance = 0.0;   // unbiased, (n-1) denominator
  double std_error = 0.0;  // sqrt(variance / n)
  std::size_t count = 0;
};

/// Two-pass mean/variance with compensated sums.
inline summary_stats summarize(std::span<const double> xs) {
  summary_stats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  s.mean = neumaier_sum(xs) / static_cast<double>(xs.size());
  if (xs.size() < 2) return s;
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double d = (x - s.mean) * (x - s.mean);
    const double t = sum + d;
    comp += (std::abs(sum) >= d) ? (sum - t) + d : (d - t) + sum;
    sum = t;
  }
  s.variance = (sum + comp) / static_cast<double>(xs.size() - 1);
  s.std_error = std::sqrt(s.variance / static_cast<double>(xs.size()));
  return s;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Upper tail p-value of a chi-squared statistic with `dof` degrees of freedom.
inline double chi_squared_pvalue(double statistic, int dof) {
  if (dof < 1) throw std::invalid_argument("chi_squared_pvalue: dof must be >= 1");
  if (!(statistic >= 0.0)) throw std::invalid_argument("chi_squared_pvalue: statistic must be >= 0");
  return 1.0 - gamma_p(0.5 * dof, 0.5 * statistic);
}

}  // namespace pmq
