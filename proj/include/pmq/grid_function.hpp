#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace pmq {

/// Values of a function on the uniform grid {j/G : j = 0..G}.
struct grid_function {
  std::size_t grid_size = 0;
  std::vector<double> values;  // grid_size + 1 entries

  static grid_function zeros(std::size_t g) {
    grid_function f;
    f.grid_size = g;
    f.values.assign(g + 1, 0.0);
    return f;
  }

  template <class Fn>
  static grid_function sample(std::size_t g, Fn&& fn) {
    grid_function f = zeros(g);
    for (std::size_t j = 0; j <= g; ++j) f.values[j] = fn(static_cast<double>(j) / static_cast<double>(g));
    return f;
  }

  double s_at(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(grid_size); }

  double max_value() const { return *std::max_element(values.begin(), values.end()); }

  double max_abs_diff(const grid_function& other) const {
    if (other.grid_size != grid_size) throw std::invalid_argument("grid_function: size mismatch");
    double m = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) m = std::max(m, std::abs(values[j] - other.values[j]));
    return m;
  }
};

inline void write_grid_csv(const grid_function& f, std::ostream& out, const char* value_column = "value") {
  out << "s," << value_column << "\n";
  char buf[80];
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.15g,%.15g\n", f.s_at(j), f.values[j]);
    out << buf;
  }
}

/// Fritsch-Carlson monotone cubic (PCHIP) interpolant of a grid function.
/// Shape-preserving: no overshoot between grid points.
class pchip_interpolant {
 public:
  explicit pchip_interpolant(const grid_function& f) : g_(f.grid_size), y_(f.values), d_(f.values.size(), 0.0) {
    const std::size_t n = y_.size();
    if (n < 2) throw std::invalid_argument("pchip_interpolant: need at least 2 grid points");
    const double inv_h = static_cast<double>(g_);
    std::vector<double> delta(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) delta[j] = (y_[j + 1] - y_[j]) * inv_h;
    for (std::size_t j = 1; j + 1 < n; ++j) {
      if (delta[j - 1] * delta[j] <= 0.0)
        d_[j] = 0.0;
      else
        d_[j] = 2.0 * delta[j - 1] * delta[j] / (delta[j - 1] + delta[j]);
    }
    d_[0] = edge_slope(delta[0], n > 2 ? delta[1] : delta[0]);
    d_[n - 1] = edge_slope(delta[n - 2], n > 2 ? delta[n - 3] : delta[n - 2]);
  }

  double operator()(double u) const {
    const double pos = std::clamp(u, 0.0, 1.0) * static_cast<double>(g_);
    const std::size_t j = std::min(static_cast<std::size_t>(pos), g_ - 1);
    const double t = pos - static_cast<double>(j);
    const double h = 1.0 / static_cast<double>(g_);
    const double t2 = t * t, t3 = t2 * t;
    return y_[j] * (2.0 * t3 - 3.0 * t2 + 1.0) + d_[j] * h * (t3 - 2.0 * t2 + t) + y_[j + 1] * (-2.0 * t3 + 3.0 * t2) +
           d_[j + 1] * h * (t3 - t2);
  }

 private:
  static double edge_slope(double d_near, double d_far) {
    double d = 1.5 * d_near - 0.5 * d_far;
    if (d * d_near <= 0.0) return 0.0;
    if (d_near * d_far < 0.0 && std::abs(d) > 3.0 * std::abs(d_near)) return 3.0 * d_near;
    return d;
  }

  std::size_t g_;
  std::vector<double> y_;
  std::vector<double> d_;
};

}  // namespace pmq
