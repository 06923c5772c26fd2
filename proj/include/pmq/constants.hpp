#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmq/special_functions.hpp"

namespace pmq {

/// Closed-form constants of the partial match cost model in 2-d quadtrees.
/// Everything is derived from the exponent beta, the positive root of
/// b^2 + 3b - 2 = 0, at table construction time; nothing is hard-coded.
struct constants_table {
  double beta_exp;   ///< (sqrt(17) - 3) / 2, growth exponent of the mean cost
  double kappa;      ///< E[C_n(xi)] ~ kappa n^beta for a uniform query xi
  double k1;         ///< E[C_n(s)] ~ k1 (s(1-s))^{beta/2} n^beta for fixed s
  double c2;         ///< E[Z(s)^2] = c2 (s(1-s))^beta for the limit process Z
  double k4;         ///< Var C_n(xi) ~ k4 n^{2 beta}; equals k1^2 var_z_xi
  double var_z_xi;   ///< Var Z(xi) for a uniform query xi
  double edge_exp;   ///< sqrt(2) - 1, exponent of the mean cost at s = 0
};

inline constants_table make_constants_table() {
  constants_table t{};
  const double b = (std::sqrt(17.0) - 3.0) / 2.0;
  t.beta_exp = b;
  const double g_b1 = gamma_fn(b + 1.0);
  t.kappa = gamma_fn(2.0 * b + 2.0) / (2.0 * g_b1 * g_b1 * g_b1);
  t.k1 = t.kappa * gamma_fn(b + 2.0) / (gamma_fn(b / 2.0 + 1.0) * gamma_fn(b / 2.0 + 1.0));
  const double beta_b1 = beta_fn(b + 1.0, b + 1.0);
  t.c2 = 2.0 * beta_b1 * (2.0 * b + 1.0) / (3.0 * (1.0 - b));
  const double beta_h = beta_fn(b / 2.0 + 1.0, b / 2.0 + 1.0);
  t.var_z_xi = t.c2 * beta_b1 - beta_h * beta_h;
  t.k4 = t.k1 * t.k1 * t.var_z_xi;
  t.edge_exp = std::sqrt(2.0) - 1.0;
  return t;
}

/// Shared immutable table; safe for concurrent readers.
inline const constants_table& constants() {
  static const constants_table table = make_constants_table();
  return table;
}

/// Mean shape of the limit process, h(s) = (s(1-s))^{beta/2}. Zero at both ends.
inline double mean_curve(double s) {
  assert(s >= 0.0 && s <= 1.0);
  const double p = s * (1.0 - s);
  return p <= 0.0 ? 0.0 : std::pow(p, constants().beta_exp / 2.0);
}

/// First-moment limit of the cost at fixed s, mu1(s) = k1 h(s).
inline double mu1(double s) { return constants().k1 * mean_curve(s); }

/// Moments c_m = E[Z^m] of the one-dimensional marginal factor of the
/// limit process, c_1 = 1.
struct moment_sequence {
  std::vector<double> values;  // values[m-1] = c_m
};

/// Leading coefficient convention for the moment recurrence. The two forms
/// differ by a factor 2 in the prefactor; `doubled` uses 2(beta m + 1),
/// `single` uses (beta m + 1). Simulation of the limit process supports
/// `single` (see README findings); `doubled` is kept as the primary form.
enum class moment_prefactor { doubled, single };

/// c_1 = 1 and, for m >= 2,
///   c_m = P(m) / ((m-1)(m+1 - (3/2) beta m)) *
///         sum_{l=1}^{m-1} binom(m,l) B(beta l + 1, beta (m-l) + 1) c_l c_{m-l}
/// with P(m) = 2(beta m + 1) or (beta m + 1) depending on `prefactor`.
inline moment_sequence moment_recurrence(std::size_t M, moment_prefactor prefactor = moment_prefactor::doubled) {
  if (M < 1) throw std::invalid_argument("moment_recurrence: M must be >= 1");
  const double b = constants().beta_exp;
  moment_sequence seq;
  seq.values.reserve(M);
  seq.values.push_back(1.0);
  for (std::size_t m = 2; m <= M; ++m) {
    const double md = static_cast<double>(m);
    const double denom = (md - 1.0) * (md + 1.0 - 1.5 * b * md);
    // (3/2) beta < 1, so the denominator is positive for every m; the check
    // guards against future exponent changes.
    if (denom <= 1e-12)
      throw std::runtime_error("moment_recurrence: non-positive denominator at m = " + std::to_string(m));
    double sum = 0.0;
    for (std::size_t l = 1; l < m; ++l) {
      sum += binomial_coefficient(m, l) * beta_fn(b * l + 1.0, b * (m - l) + 1.0) * seq.values[l - 1] *
             seq.values[m - l - 1];
    }
    const double prefix = (prefactor == moment_prefactor::doubled ? 2.0 : 1.0) * (b * md + 1.0);
    seq.values.push_back(prefix / denom * sum);
  }
  return seq;
}

}  // namespace pmq
