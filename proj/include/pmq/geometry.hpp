#pragma once

namespace pmq {

/// A data point in the unit square.
struct point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned rectangle, half-open on both axes: [x_lo, x_hi) x [y_lo, y_hi).
/// The right/top edges of the unit square are treated as closed so that
/// queries at s = 1 behave like every other boundary query.
struct region {
  double x_lo = 0.0;
  double x_hi = 1.0;
  double y_lo = 0.0;
  double y_hi = 1.0;

  double x_extent() const { return x_hi - x_lo; }
  double area() const { return (x_hi - x_lo) * (y_hi - y_lo); }

  bool contains_x(double s) const { return (s >= x_lo && s < x_hi) || (s == x_hi && x_hi == 1.0); }

  bool contains(point p) const {
    const bool in_x = (p.x >= x_lo && p.x < x_hi) || (p.x == x_hi && x_hi == 1.0);
    const bool in_y = (p.y >= y_lo && p.y < y_hi) || (p.y == y_hi && y_hi == 1.0);
    return in_x && in_y;
  }

  bool contains_region(const region& r) const {
    return r.x_lo >= x_lo && r.x_hi <= x_hi && r.y_lo >= y_lo && r.y_hi <= y_hi;
  }

  bool overlaps(const region& r) const {
    return r.x_lo < x_hi && x_lo < r.x_hi && r.y_lo < y_hi && y_lo < r.y_hi;
  }
};

}  // namespace pmq
