#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmq/geometry.hpp"
#include "pmq/rng.hpp"
#include "pmq/stats.hpp"

namespace pmq {

enum class tree_kind { quadtree, kd, relaxed_kd };

inline const char* to_string(tree_kind k) {
  switch (k) {
    case tree_kind::quadtree: return "quadtree";
    case tree_kind::kd: return "kd";
    case tree_kind::relaxed_kd: return "relaxed_kd";
  }
  return "?";
}

inline tree_kind tree_kind_from_string(const std::string& s) {
  if (s == "quadtree") return tree_kind::quadtree;
  if (s == "kd") return tree_kind::kd;
  if (s == "relaxed_kd") return tree_kind::relaxed_kd;
  throw std::invalid_argument("unknown tree kind: " + s);
}

/// Raised when two input points share an x or a y coordinate. The continuous
/// model makes this a probability-zero event; callers may perturb or redraw.
class duplicate_coordinate_error : public std::invalid_argument {
 public:
  duplicate_coordinate_error(char axis, std::size_t i, std::size_t j, double value)
      : std::invalid_argument(std::string("duplicate ") + axis + " coordinate " + std::to_string(value) +
                              " shared by points " + std::to_string(i) + " and " + std::to_string(j)),
        axis_(axis),
        first_(i),
        second_(j) {}
  char axis() const { return axis_; }
  std::size_t first_index() const { return first_; }
  std::size_t second_index() const { return second_; }

 private:
  char axis_;
  std::size_t first_, second_;
};

/// Quadrant slots of a quadtree node, in the order SW, NW, SE, NE
/// (the 1..4 numbering of the region layout, zero-based).
inline constexpr int quad_sw = 0;
inline constexpr int quad_nw = 1;
inline constexpr int quad_se = 2;
inline constexpr int quad_ne = 3;

struct tree_node {
  point p;
  region reg;
  std::array<std::int32_t, 4> child{-1, -1, -1, -1};  // kd variants use slots 0 (low) and 1 (high)
  std::uint8_t axis = 0;                              // 0 = x, 1 = y; meaningful for kd variants
};

/// A point quadtree / k-d tree / relaxed k-d tree over the unit square,
/// stored as a node arena with index links. Immutable once built.
class search_tree {
 public:
  static constexpr std::int32_t nil = -1;

  tree_kind kind() const { return kind_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const tree_node& node(std::size_t i) const { return nodes_[i]; }
  std::span<const tree_node> nodes() const { return nodes_; }
  std::int32_t root() const { return nodes_.empty() ? nil : 0; }

 private:
  friend search_tree build(std::span<const point>, tree_kind, rng_stream*);
  tree_kind kind_ = tree_kind::quadtree;
  std::vector<tree_node> nodes_;
};

namespace detail {

inline void check_distinct_coordinates(std::span<const point> pts) {
  static thread_local std::vector<double> buf;
  for (int axis = 0; axis < 2; ++axis) {
    buf.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) buf[i] = axis == 0 ? pts[i].x : pts[i].y;
    std::sort(buf.begin(), buf.end());
    const auto dup = std::adjacent_find(buf.begin(), buf.end());
    if (dup == buf.end()) continue;
    // rare path: recover the offending indices for the error message
    std::size_t first = pts.size(), second = pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double v = axis == 0 ? pts[i].x : pts[i].y;
      if (v != *dup) continue;
      if (first == pts.size())
        first = i;
      else {
        second = i;
        break;
      }
    }
    throw duplicate_coordinate_error(axis == 0 ? 'x' : 'y', first, second, *dup);
  }
}

inline region child_region_quad(const tree_node& parent, bool east, bool north) {
  region r = parent.reg;
  (east ? r.x_lo : r.x_hi) = parent.p.x;
  (north ? r.y_lo : r.y_hi) = parent.p.y;
  return r;
}

inline region child_region_kd(const tree_node& parent, bool high) {
  region r = parent.reg;
  if (parent.axis == 0)
    (high ? r.x_lo : r.x_hi) = parent.p.x;
  else
    (high ? r.y_lo : r.y_hi) = parent.p.y;
  return r;
}

}  // namespace detail

/// Builds a tree by inserting the points in the given order. Routing sends a
/// coordinate equal to a split to the high side, matching the half-open
/// region convention. `axis_rng` is required for relaxed k-d trees and
/// supplies one draw per inserted node.
inline search_tree build(std::span<const point> pts, tree_kind kind, rng_stream* axis_rng = nullptr) {
  if (kind == tree_kind::relaxed_kd && axis_rng == nullptr)
    throw std::invalid_argument("build: relaxed_kd requires an rng stream for the per-node axis draws");
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!(pts[i].x >= 0.0 && pts[i].x <= 1.0 && pts[i].y >= 0.0 && pts[i].y <= 1.0))
      throw std::invalid_argument("build: point " + std::to_string(i) + " outside the unit square");
  detail::check_distinct_coordinates(pts);

  search_tree t;
  t.kind_ = kind;
  t.nodes_.reserve(pts.size());
  for (const point& p : pts) {
    tree_node fresh;
    fresh.p = p;
    if (kind == tree_kind::relaxed_kd) fresh.axis = static_cast<std::uint8_t>(axis_rng->next_u64() >> 63);
    if (t.nodes_.empty()) {
      if (kind == tree_kind::kd) fresh.axis = 0;
      fresh.reg = region{};
      t.nodes_.push_back(fresh);
      continue;
    }
    std::int32_t cur = 0;
    for (;;) {
      tree_node& q = t.nodes_[static_cast<std::size_t>(cur)];
      int slot;
      if (kind == tree_kind::quadtree) {
        const bool east = p.x >= q.p.x;
        const bool north = p.y >= q.p.y;
        slot = (east ? 2 : 0) + (north ? 1 : 0);
      } else {
        const double coord = q.axis == 0 ? p.x : p.y;
        const double split = q.axis == 0 ? q.p.x : q.p.y;
        slot = coord >= split ? 1 : 0;
      }
      const std::int32_t next = q.child[static_cast<std::size_t>(slot)];
      if (next != search_tree::nil) {
        cur = next;
        continue;
      }
      if (kind == tree_kind::quadtree)
        fresh.reg = detail::child_region_quad(q, slot >= 2, (slot & 1) != 0);
      else
        fresh.reg = detail::child_region_kd(q, slot == 1);
      if (kind == tree_kind::kd) fresh.axis = q.axis ^ 1;
      const auto idx = static_cast<std::int32_t>(t.nodes_.size());
      q.child[static_cast<std::size_t>(slot)] = idx;
      t.nodes_.push_back(fresh);
      break;
    }
  }
  return t;
}

inline std::vector<point> sample_uniform_points(std::size_t n, rng_stream& rng) {
  std::vector<point> pts(n);
  for (auto& p : pts) {
    p.x = rng.next_double();
    p.y = rng.next_double();
  }
  return pts;
}

/// Poisson(t) point count for the Poissonized cost P_t(s).
inline std::uint64_t poisson_point_count(double t, rng_stream& rng) { return poisson_draw(t, rng); }

/// Number of nodes visited by the partial match traversal for the vertical
/// query line at s. Equals the number of node regions whose x-extent
/// contains s.
inline std::int64_t partial_match_cost(const search_tree& t, double s) {
  if (t.empty()) return 0;
  std::int64_t visited = 0;
  static thread_local std::vector<std::int32_t> stack;
  stack.clear();
  stack.push_back(0);
  while (!stack.empty()) {
    const tree_node& q = t.node(static_cast<std::size_t>(stack.back()));
    stack.pop_back();
    ++visited;
    if (t.kind() == tree_kind::quadtree) {
      const int base = s >= q.p.x ? 2 : 0;
      if (q.child[static_cast<std::size_t>(base)] != search_tree::nil) stack.push_back(q.child[static_cast<std::size_t>(base)]);
      if (q.child[static_cast<std::size_t>(base + 1)] != search_tree::nil) stack.push_back(q.child[static_cast<std::size_t>(base + 1)]);
    } else if (q.axis == 0) {
      const int side = s >= q.p.x ? 1 : 0;
      if (q.child[static_cast<std::size_t>(side)] != search_tree::nil) stack.push_back(q.child[static_cast<std::size_t>(side)]);
    } else {
      if (q.child[0] != search_tree::nil) stack.push_back(q.child[0]);
      if (q.child[1] != search_tree::nil) stack.push_back(q.child[1]);
    }
  }
  return visited;
}

/// The piecewise-constant map s -> C_n(s) as interior breakpoints plus the
/// value on each interval (half-open at breakpoints). Breakpoints with a zero
/// net jump are merged away, so adjacent values always differ.
struct cost_profile {
  std::vector<double> breakpoints;
  std::vector<std::int64_t> values;

  std::int64_t value_at(double s) const {
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), s);
    return values[static_cast<std::size_t>(it - breakpoints.begin())];
  }

  double integral() const {
    std::vector<double> terms;
    terms.reserve(values.size());
    double left = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double right = i < breakpoints.size() ? breakpoints[i] : 1.0;
      terms.push_back(static_cast<double>(values[i]) * (right - left));
      left = right;
    }
    return neumaier_sum(terms);
  }

  std::int64_t max_value() const {
    std::int64_t m = 0;
    for (auto v : values) m = std::max(m, v);
    return m;
  }

  /// Left endpoint of the first interval attaining the maximum.
  double argmax_left() const {
    std::int64_t m = max_value();
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] == m) return i == 0 ? 0.0 : breakpoints[i - 1];
    return 0.0;
  }
};

/// One-pass sweep over the node x-extents: +1 at x_lo, -1 at x_hi.
inline cost_profile compute_cost_profile(const search_tree& t) {
  cost_profile prof;
  if (t.empty()) {
    prof.values.push_back(0);
    return prof;
  }
  std::vector<std::pair<double, std::int32_t>> events;
  events.reserve(2 * t.size());
  std::int64_t base = 0;
  for (const tree_node& n : t.nodes()) {
    if (n.reg.x_lo > 0.0)
      events.emplace_back(n.reg.x_lo, 1);
    else
      ++base;
    if (n.reg.x_hi < 1.0) events.emplace_back(n.reg.x_hi, -1);
  }
  std::sort(events.begin(), events.end());
  std::int64_t cur = base;
  prof.values.push_back(cur);
  std::size_t i = 0;
  while (i < events.size()) {
    const double coord = events[i].first;
    std::int64_t delta = 0;
    while (i < events.size() && events[i].first == coord) delta += events[i++].second;
    if (delta == 0) continue;
    cur += delta;
    prof.breakpoints.push_back(coord);
    prof.values.push_back(cur);
  }
  return prof;
}

/// Sum over nodes of their region x-extent; equals the profile integral.
inline double node_extent_sum(const search_tree& t) {
  std::vector<double> extents;
  extents.reserve(t.size());
  for (const tree_node& n : t.nodes()) extents.push_back(n.reg.x_extent());
  return neumaier_sum(extents);
}

/// (S_n, s*) where S_n = max_s C_n(s) and s* is the left endpoint of an
/// attaining interval.
inline std::pair<std::int64_t, double> worst_query_cost(const search_tree& t) {
  const cost_profile prof = compute_cost_profile(t);
  return {prof.max_value(), prof.argmax_left()};
}

/// Reads points from CSV with columns x,y; a non-numeric first line is
/// treated as a header.
inline std::vector<point> read_points_csv(std::istream& in) {
  std::vector<point> pts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("points csv line " + std::to_string(line_no) + ": expected 'x,y'");
    point p;
    try {
      std::size_t used = 0;
      p.x = std::stod(line.substr(0, comma), &used);
      p.y = std::stod(line.substr(comma + 1), &used);
    } catch (const std::exception&) {
      if (line_no == 1 && pts.empty()) continue;  // header row
      throw std::runtime_error("points csv line " + std::to_string(line_no) + ": cannot parse '" + line + "'");
    }
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
      throw std::runtime_error("points csv line " + std::to_string(line_no) + ": coordinates outside [0,1]");
    pts.push_back(p);
  }
  return pts;
}

inline void write_profile_csv(const cost_profile& prof, std::ostream& out) {
  out << "s_left,s_right,cost\n";
  char buf[128];
  double left = 0.0;
  for (std::size_t i = 0; i < prof.values.size(); ++i) {
    const double right = i < prof.breakpoints.size() ? prof.breakpoints[i] : 1.0;
    std::snprintf(buf, sizeof buf, "%.15g,%.15g,%lld\n", left, right, static_cast<long long>(prof.values[i]));
    out << buf;
    left = right;
  }
}

}  // namespace pmq
