#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmq/constants.hpp"
#include "pmq/grid_function.hpp"

namespace pmq {

/// Gauss-Legendre nodes and weights on [0, 1], cached per order.
inline const std::vector<std::pair<double, double>>& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  static std::map<int, std::vector<std::pair<double, double>>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<std::pair<double, double>> rule(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));  // Chebyshev initial guess
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule[static_cast<std::size_t>(i)] = {0.5 * (1.0 - x), 0.5 * w};
    rule[static_cast<std::size_t>(n - 1 - i)] = {0.5 * (1.0 + x), 0.5 * w};
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

struct quadrature_config {
  int nodes = 64;             ///< Gauss-Legendre points per grid cell
  std::size_t grid_size = 512;
  double tolerance = 1e-10;   ///< sup-norm stopping threshold for the iteration
  int max_iters = 200;

  void validate() const {
    if (nodes < 4) throw std::invalid_argument("quadrature_config: nodes must be >= 4");
    if (grid_size < 8) throw std::invalid_argument("quadrature_config: grid_size must be >= 8");
    if (!(tolerance > 0.0)) throw std::invalid_argument("quadrature_config: tolerance must be > 0");
    if (max_iters < 1) throw std::invalid_argument("quadrature_config: max_iters must be >= 1");
  }
};

namespace detail {

// One application of the second-moment operator,
//   Kf(s) = 2/(2b+1) [ int_s^1 x^{2b} f(s/x) dx + int_0^s (1-x)^{2b} f((1-s)/(1-x)) dx ]
//           + 2 B(b+1,b+1) (s(1-s))^b / (b+1).
// Substituting u = s/x resp. w = (1-s)/(1-x) turns both integrals into the
// single kernel J(a) = int_a^1 u^{-2b-2} f(u) du:
//   Kf(s) = 2/(2b+1) [ s^{2b+1} J(s) + (1-s)^{2b+1} J(1-s) ] + inhomogeneous,
// and J at every grid point follows from right-to-left prefix sums of
// per-cell integrals.
//
// The cell integrals use product integration: f is factored through the
// envelope w(u) = (u(1-u))^b that every function in the solution cone of
// this equation carries at the endpoints, the smooth part f/w is evaluated
// by monotone cubic interpolation of its interior grid values, and the
// singular weight u^{-2b-2} w(u) is integrated by Gauss-Legendre (with a
// substitution absorbing the (1-u)^b factor on the final cell). For
// envelope-shaped f the discretization is exact up to quadrature roundoff.
class k_operator {
 public:
  k_operator(const grid_function& f, int gl_nodes)
      : g_(f.grid_size), f_(f.values), rule_(gauss_legendre(gl_nodes)) {
    if (g_ < 4) throw std::invalid_argument("apply_K: grid_size must be >= 4");
    const double b = constants().beta_exp;
    beta_ = b;
    two_b_ = 2.0 * b;
    inhom_scale_ = 2.0 * beta_fn(b + 1.0, b + 1.0) / (b + 1.0);
    grid_function smooth;
    smooth.grid_size = g_ - 2;
    smooth.values.resize(g_ - 1);
    for (std::size_t j = 1; j < g_; ++j) {
      const double s = grid_s(j);
      smooth.values[j - 1] = f_[j] / std::pow(s * (1.0 - s), b);
    }
    smooth_part_.emplace(smooth);
  }

  grid_function apply() const {
    const std::size_t g = g_;
    // J[j] = int_{j/g}^1 u^{-2b-2} f(u) du; cell 0 is never needed because
    // s = 0 and s = 1 are handled in closed form below.
    std::vector<double> cell(g, 0.0);
    for (std::size_t j = 1; j + 1 < g; ++j) cell[j] = interior_cell_integral(j);
    cell[g - 1] = last_cell_integral();
    std::vector<double> J(g + 1, 0.0);
    for (std::size_t j = g; j-- > 1;) J[j] = J[j + 1] + cell[j];

    grid_function out = grid_function::zeros(g);
    const double scale = 2.0 / (two_b_ + 1.0);
    for (std::size_t j = 1; j < g; ++j) {
      const double s = grid_s(j);
      const double homogeneous = std::pow(s, two_b_ + 1.0) * J[j] + std::pow(1.0 - s, two_b_ + 1.0) * J[g - j];
      out.values[j] = scale * homogeneous + inhom_scale_ * std::pow(s * (1.0 - s), beta_);
    }
    // At s = 0 the first integral degenerates to f(0)/(2b+1) and the second
    // vanishes; s = 1 is the mirror image and probes f(0) as well.
    out.values[0] = out.values[g] = scale * f_.front() / (two_b_ + 1.0);
    return out;
  }

 private:
  double grid_s(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(g_); }

  // f/w interpolated over the interior grid points x_1 .. x_{g-1}
  double smooth_at(double u) const {
    const double lo = grid_s(1), hi = grid_s(g_ - 1);
    return (*smooth_part_)((u - lo) / (hi - lo));
  }

  double interior_cell_integral(std::size_t j) const {
    const double lo = grid_s(j);
    const double width = 1.0 / static_cast<double>(g_);
    double acc = 0.0;
    for (const auto& [t, w] : rule_) {
      const double u = lo + width * t;
      // u^{-2b-2} (u(1-u))^b = u^{-b-2} (1-u)^b, smooth across this cell
      acc += w * std::pow(u, -beta_ - 2.0) * std::pow(1.0 - u, beta_) * smooth_at(u);
    }
    return acc * width;
  }

  // Final cell [1 - 1/g, 1]: the smooth part is frozen at its last interior
  // value and int u^{-b-2} (1-u)^b du is computed with the substitution
  // 1-u = delta t^{1/(b+1)}, which absorbs the algebraic endpoint factor.
  double last_cell_integral() const {
    const double delta = 1.0 / static_cast<double>(g_);
    double acc = 0.0;
    for (const auto& [t, w] : rule_) {
      const double dist = delta * std::pow(t, 1.0 / (beta_ + 1.0));
      acc += w * std::pow(1.0 - dist, -beta_ - 2.0);
    }
    acc *= std::pow(delta, beta_ + 1.0) / (beta_ + 1.0);
    return acc * smooth_part_->operator()(1.0);
  }

  std::size_t g_;
  const std::vector<double>& f_;
  const std::vector<std::pair<double, double>>& rule_;
  std::optional<pchip_interpolant> smooth_part_;
  double beta_ = 0.0;
  double two_b_ = 0.0;
  double inhom_scale_ = 0.0;
};

}  // namespace detail

/// One application of the contraction map K to a grid function.
inline grid_function apply_K(const grid_function& f, int gl_nodes = 64) {
  if (f.values.size() != f.grid_size + 1) throw std::invalid_argument("apply_K: malformed grid function");
  return detail::k_operator(f, gl_nodes).apply();
}

struct fixed_point_result {
  grid_function solution;
  int iterations = 0;
  double residual = 0.0;              ///< sup norm of K(solution) - solution
  std::vector<double> step_ratios;    ///< successive contraction ratios of the iteration
};

/// Fixed-point iteration f <- Kf started from f = 0. The first iterate is
/// exactly the inhomogeneous term; convergence is geometric with ratio
/// 2/((2b+1)(b+1)).
inline fixed_point_result solve_fixed_point(const quadrature_config& config) {
  config.validate();
  fixed_point_result result;
  grid_function f = grid_function::zeros(config.grid_size);
  double prev_step = 0.0;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    grid_function next = apply_K(f, config.nodes);
    const double step = next.max_abs_diff(f);
    if (prev_step > 0.0) result.step_ratios.push_back(step / prev_step);
    prev_step = step;
    f = std::move(next);
    result.iterations = iter;
    if (step < config.tolerance) {
      result.residual = apply_K(f, config.nodes).max_abs_diff(f);
      result.solution = std::move(f);
      return result;
    }
  }
  throw std::runtime_error("solve_fixed_point: no convergence within " + std::to_string(config.max_iters) +
                           " iterations");
}

}  // namespace pmq
