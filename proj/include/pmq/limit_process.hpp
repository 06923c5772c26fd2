#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "pmq/constants.hpp"
#include "pmq/errors.hpp"
#include "pmq/grid_function.hpp"
#include "pmq/parallel.hpp"
#include "pmq/rng.hpp"
#include "pmq/stats.hpp"

namespace pmq {

/// One level of the limit-process recursion: the four-branch recombination
///   G(x,y,f1..f4)(s) = 1{s<x} [ (xy)^b f1(s/x) + (x(1-y))^b f2(s/x) ]
///                    + 1{s>=x} [ ((1-x)y)^b f3((s-x)/(1-x)) + ((1-x)(1-y))^b f4((s-x)/(1-x)) ]
/// with b the cost exponent. A query exactly at the split takes the high branch.
template <class F1, class F2, class F3, class F4>
double apply_G(double x, double y, F1&& f1, F2&& f2, F3&& f3, F4&& f4, double s) {
  const double b = constants().beta_exp;
  if (s < x) {
    const double rel = s / x;
    return std::pow(x * y, b) * f1(rel) + std::pow(x * (1.0 - y), b) * f2(rel);
  }
  const double rel = (s - x) / (1.0 - x);
  return std::pow((1.0 - x) * y, b) * f3(rel) + std::pow((1.0 - x) * (1.0 - y), b) * f4(rel);
}

// ---- split sources -------------------------------------------------------
//
// A split source hands out the relative split coordinates (u, v) of each box
// of the 4-ary recursion. `random_splits` draws them on first visit (lazy, in
// visit order), `constant_splits` is the deterministic test hook, and
// `stored_splits` is a fully expanded tree usable for evaluations that must
// share one realization across several depths.

struct random_splits {
  rng_stream& rng;
  struct cursor {};
  cursor root() const { return {}; }
  cursor child(cursor, int) const { return {}; }
  std::pair<double, double> split_at(cursor) { return {rng.next_double(), rng.next_double()}; }
};

struct constant_splits {
  double u = 0.5;
  double v = 0.5;
  struct cursor {};
  cursor root() const { return {}; }
  cursor child(cursor, int) const { return {}; }
  std::pair<double, double> split_at(cursor) const { return {u, v}; }
};

class stored_splits {
 public:
  using cursor = std::int32_t;

  /// Fully expanded split tree of the given depth (4^depth leaves).
  static stored_splits full(int depth, rng_stream& rng) {
    return build(depth, [&rng](std::size_t) { return std::pair{rng.next_double(), rng.next_double()}; });
  }

  static stored_splits constant(int depth, double u, double v) {
    return build(depth, [u, v](std::size_t) { return std::pair{u, v}; });
  }

  cursor root() const { return 0; }
  cursor child(cursor c, int q) const {
    const std::size_t first = static_cast<std::size_t>(c) * 4 + 1 + static_cast<std::size_t>(q);
    return first < count_ ? static_cast<cursor>(first) : -1;
  }
  std::pair<double, double> split_at(cursor c) const {
    if (c < 0) throw std::logic_error("stored_splits: evaluation deeper than the stored depth");
    return splits_[static_cast<std::size_t>(c)];
  }
  int depth() const { return depth_; }

 private:
  template <class Gen>
  static stored_splits build(int depth, Gen&& gen) {
    if (depth < 0 || depth > 10) throw std::invalid_argument("stored_splits: depth must be in [0, 10]");
    stored_splits t;
    t.depth_ = depth;
    std::size_t total = 0, level = 1;
    for (int d = 0; d <= depth; ++d, level *= 4) total += level;
    t.count_ = total;
    t.splits_.resize(total);
    // heap layout: children of node c are 4c+1 .. 4c+4
    for (std::size_t i = 0; i < total; ++i) t.splits_[i] = gen(i);
    return t;
  }

  std::vector<std::pair<double, double>> splits_;
  std::size_t count_ = 0;
  int depth_ = 0;
};

inline constexpr std::size_t default_box_budget = std::size_t{1} << 26;

struct zn_eval_stats {
  std::size_t boxes_visited = 0;
  std::size_t leaf_boxes = 0;
};

namespace detail {

template <class Splits>
struct zn_evaluator {
  Splits& splits;
  int target_depth;
  std::span<const double> query;  // ascending
  std::span<double> out;
  double beta;
  double half_beta;
  std::size_t box_budget;
  zn_eval_stats* stats;
  std::size_t visited = 0;

  void run() {
    if (query.empty()) return;
    recurse(splits.root(), 0.0, 1.0, 1.0, 0, 0, query.size());
    if (stats) stats->boxes_visited = visited;
  }

  // Box with x-extent [xlo, xhi), volume vol, at depth d, crossed by the
  // query points with indices [i0, i1).
  void recurse(typename std::remove_reference_t<Splits>::cursor cur, double xlo, double xhi, double vol, int d,
               std::size_t i0, std::size_t i1) {
    if (++visited > box_budget)
      throw resource_limit_error("limit process evaluation exceeded the box budget of " + std::to_string(box_budget));
    if (d == target_depth) {
      if (stats) ++stats->leaf_boxes;
      const double weight = std::pow(vol, beta);
      const double width = xhi - xlo;
      for (std::size_t i = i0; i < i1; ++i) {
        // plain division so a query at the box boundary lands exactly on 0 or 1
        const double rel = (query[i] - xlo) / width;
        const double p = rel * (1.0 - rel);
        if (p > 0.0) out[i] += weight * std::pow(p, half_beta);
      }
      return;
    }
    const auto [u, v] = splits.split_at(cur);
    const double sx = xlo + u * (xhi - xlo);
    const auto begin = query.begin();
    const std::size_t mid =
        static_cast<std::size_t>(std::lower_bound(begin + i0, begin + i1, sx) - begin);
    if (mid > i0) {
      recurse(splits.child(cur, 0), xlo, sx, vol * u * v, d + 1, i0, mid);
      recurse(splits.child(cur, 1), xlo, sx, vol * u * (1.0 - v), d + 1, i0, mid);
    }
    if (mid < i1) {
      recurse(splits.child(cur, 2), sx, xhi, vol * (1.0 - u) * v, d + 1, mid, i1);
      recurse(splits.child(cur, 3), sx, xhi, vol * (1.0 - u) * (1.0 - v), d + 1, mid, i1);
    }
  }
};

}  // namespace detail

/// Evaluates one sample path of Z_n at the given ascending query points,
/// accumulating into `out` (which must be zero-initialized by the caller).
/// Only boxes whose x-extent contains a query point are expanded.
template <class Splits>
void eval_limit_path(int depth, std::span<const double> sorted_query, Splits&& splits, std::span<double> out,
                     std::size_t box_budget = default_box_budget, zn_eval_stats* stats = nullptr) {
  detail::zn_evaluator<Splits> ev{splits,
                                  depth,
                                  sorted_query,
                                  out,
                                  constants().beta_exp,
                                  constants().beta_exp / 2.0,
                                  box_budget,
                                  stats};
  ev.run();
}

/// One sample path of Z_n on the uniform grid.
template <class Splits>
grid_function simulate_Zn_with(int depth, std::size_t grid_size, Splits&& splits,
                               std::size_t box_budget = default_box_budget) {
  grid_function f = grid_function::zeros(grid_size);
  std::vector<double> query(grid_size + 1);
  for (std::size_t j = 0; j <= grid_size; ++j) query[j] = static_cast<double>(j) / static_cast<double>(grid_size);
  eval_limit_path(depth, query, splits, f.values, box_budget);
  return f;
}

inline grid_function simulate_Zn(int depth, std::size_t grid_size, rng_stream& rng,
                                 std::size_t box_budget = default_box_budget) {
  random_splits splits{rng};
  return simulate_Zn_with(depth, grid_size, splits, box_budget);
}

/// Independent replicates of Z_n evaluated at one point s.
inline std::vector<double> sample_Zn_point(double s, int depth, std::size_t replicates, std::uint64_t master_seed,
                                           int threads = 0, std::size_t box_budget = default_box_budget) {
  std::vector<double> values(replicates, 0.0);
  const double query[1] = {s};
  parallel_for(replicates, threads, [&](std::size_t r) {
    rng_stream rng = substream(master_seed, r, 0x5a);
    random_splits splits{rng};
    double out[1] = {0.0};
    eval_limit_path(depth, query, splits, out, box_budget);
    values[r] = out[0];
  });
  return values;
}

struct sup_estimate {
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  std::size_t replicates = 0;
  int depth = 0;
  std::size_t grid_size = 0;
};

/// Monte Carlo estimate of E[max over the grid of Z_n] and its spread. The
/// grid maximum lower-bounds the true supremum, and Z_n at finite depth
/// approximates Z, so this estimator carries a (small) downward bias.
inline sup_estimate estimate_sup(int depth, std::size_t grid_size, std::size_t replicates, std::uint64_t master_seed,
                                 int threads = 0, std::size_t box_budget = default_box_budget) {
  std::vector<double> maxima(replicates, 0.0);
  std::vector<double> query(grid_size + 1);
  for (std::size_t j = 0; j <= grid_size; ++j) query[j] = static_cast<double>(j) / static_cast<double>(grid_size);
  parallel_for(replicates, threads, [&](std::size_t r) {
    rng_stream rng = substream(master_seed, r, 0x50);
    random_splits splits{rng};
    std::vector<double> out(query.size(), 0.0);
    eval_limit_path(depth, query, splits, out, box_budget);
    maxima[r] = *std::max_element(out.begin(), out.end());
  });
  const summary_stats s = summarize(maxima);
  return {s.mean, s.variance, s.std_error, replicates, depth, grid_size};
}

struct residual_mc_detail {
  grid_function mean_direct;     ///< grid means of Z_n
  grid_function mean_composed;   ///< grid means of G applied to four Z_{n-1} paths
  grid_function sem_direct;      ///< standard errors of the direct means
  grid_function sem_composed;    ///< standard errors of the composed means
  double max_mean_discrepancy = 0.0;
};

/// Monte Carlo check of the distributional fixed-point property: Z_n against
/// one application of the recombination to four independent Z_{n-1} paths.
inline residual_mc_detail fixed_point_residual_mc_detailed(int depth, std::size_t grid_size, std::size_t replicates,
                                                           std::uint64_t master_seed, int threads = 0,
                                                           std::size_t box_budget = default_box_budget) {
  if (depth < 1) throw std::invalid_argument("fixed_point_residual_mc: depth must be >= 1");
  const std::size_t cols = grid_size + 1;
  std::vector<double> direct(replicates * cols, 0.0);
  std::vector<double> composed(replicates * cols, 0.0);
  std::vector<double> query(cols);
  for (std::size_t j = 0; j < cols; ++j) query[j] = static_cast<double>(j) / static_cast<double>(grid_size);
  const double b = constants().beta_exp;

  parallel_for(replicates, threads, [&](std::size_t r) {
    rng_stream rng = substream(master_seed, r, 0xf1);
    {
      random_splits splits{rng};
      eval_limit_path(depth, query, splits, std::span<double>(direct.data() + r * cols, cols), box_budget);
    }
    const double u = rng.next_double();
    const double v = rng.next_double();
    const std::size_t mid = static_cast<std::size_t>(std::lower_bound(query.begin(), query.end(), u) - query.begin());
    std::vector<double> rel_west(mid), rel_east(cols - mid);
    for (std::size_t j = 0; j < mid; ++j) rel_west[j] = query[j] / u;
    for (std::size_t j = mid; j < cols; ++j) rel_east[j - mid] = (query[j] - u) / (1.0 - u);
    std::vector<double> child(cols, 0.0);
    std::span<double> row(composed.data() + r * cols, cols);
    const double w[4] = {std::pow(u * v, b), std::pow(u * (1.0 - v), b), std::pow((1.0 - u) * v, b),
                         std::pow((1.0 - u) * (1.0 - v), b)};
    for (int branch = 0; branch < 4; ++branch) {
      const bool west = branch < 2;
      std::span<const double> rel = west ? std::span<const double>(rel_west) : std::span<const double>(rel_east);
      if (rel.empty()) continue;
      std::fill(child.begin(), child.begin() + static_cast<std::ptrdiff_t>(rel.size()), 0.0);
      random_splits splits{rng};
      eval_limit_path(depth - 1, rel, splits, std::span<double>(child.data(), rel.size()), box_budget);
      for (std::size_t j = 0; j < rel.size(); ++j) row[west ? j : mid + j] += w[branch] * child[j];
    }
  });

  residual_mc_detail out;
  out.mean_direct = grid_function::zeros(grid_size);
  out.mean_composed = grid_function::zeros(grid_size);
  out.sem_direct = grid_function::zeros(grid_size);
  out.sem_composed = grid_function::zeros(grid_size);
  std::vector<double> col(replicates);
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t r = 0; r < replicates; ++r) col[r] = direct[r * cols + j];
    summary_stats sd = summarize(col);
    for (std::size_t r = 0; r < replicates; ++r) col[r] = composed[r * cols + j];
    summary_stats sc = summarize(col);
    out.mean_direct.values[j] = sd.mean;
    out.sem_direct.values[j] = sd.std_error;
    out.mean_composed.values[j] = sc.mean;
    out.sem_composed.values[j] = sc.std_error;
    out.max_mean_discrepancy = std::max(out.max_mean_discrepancy, std::abs(sd.mean - sc.mean));
  }
  return out;
}

inline double fixed_point_residual_mc(int depth, std::size_t grid_size, std::size_t replicates,
                                      std::uint64_t master_seed, int threads = 0,
                                      std::size_t box_budget = default_box_budget) {
  return fixed_point_residual_mc_detailed(depth, grid_size, replicates, master_seed, threads, box_budget)
      .max_mean_discrepancy;
}

}  // namespace pmq
