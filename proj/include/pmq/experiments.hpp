#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pmq/constants.hpp"
#include "pmq/errors.hpp"
#include "pmq/parallel.hpp"
#include "pmq/rng.hpp"
#include "pmq/stats.hpp"
#include "pmq/tree.hpp"

namespace pmq {

struct experiment_config {
  tree_kind kind = tree_kind::quadtree;
  std::vector<std::size_t> n_values;
  std::vector<double> s_values;
  bool uniform_query = false;       ///< also query at a fresh uniform xi per replicate
  std::size_t replicates = 2;
  std::uint64_t master_seed = 1;
  bool poissonized = false;         ///< Poisson(n) instead of exactly n points
  int threads = 0;                  ///< 0 = hardware concurrency
  bool record_profile = true;       ///< profile integral and worst-query cost per replicate
  bool retain_observations = false;
  std::size_t max_total_points = std::size_t{4} << 30;

  void validate() const {
    if (replicates < 2) throw std::invalid_argument("experiment_config: replicates must be >= 2");
    if (n_values.empty()) throw std::invalid_argument("experiment_config: n_values must not be empty");
    for (std::size_t i = 1; i < n_values.size(); ++i)
      if (n_values[i] <= n_values[i - 1])
        throw std::invalid_argument("experiment_config: n_values must be strictly increasing");
    if (s_values.empty() && !uniform_query)
      throw std::invalid_argument("experiment_config: need s_values or uniform_query");
    for (double s : s_values)
      if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("experiment_config: s_values must lie in [0,1]");
    std::size_t total = 0;
    for (std::size_t n : n_values) total += n * replicates;
    if (total > max_total_points)
      throw resource_limit_error("experiment would draw " + std::to_string(total) + " points, budget is " +
                                 std::to_string(max_total_points));
  }
};

struct cell_summary {
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

inline cell_summary summarize_cell(std::span<const double> xs) {
  const summary_stats s = summarize(xs);
  return {s.mean, s.variance, s.std_error, s.count};
}

struct n_result {
  std::size_t n = 0;
  std::vector<cell_summary> at_s;  // parallel to config.s_values
  cell_summary at_uniform;
  cell_summary profile_integral;
  cell_summary worst_cost;
  // raw per-replicate observations, retained on request
  std::vector<std::vector<std::int64_t>> raw_at_s;
  std::vector<std::int64_t> raw_at_uniform;
  std::vector<double> raw_integral;
  std::vector<std::int64_t> raw_worst;
};

struct fit_result {
  double exponent = 0.0;
  double amplitude = 0.0;
  double r2 = 0.0;
  double exponent_std_error = 0.0;  // CI via the normal approximation, +- 1.96 se
};

struct labeled_fit {
  std::string label;
  fit_result fit;
};

struct experiment_result {
  experiment_config config;
  std::vector<n_result> per_n;
  std::vector<labeled_fit> fits;  // filled when the n grid supports a fit
};

inline fit_result fit_exponent(std::span<const std::pair<double, double>> pairs);

/// Replicated cost measurements over fresh random trees. Each (replicate,
/// n-index) pair owns a hash-derived substream, so the result is identical
/// for any thread count. Replicates whose point sets violate the
/// distinct-coordinate precondition (a probability ~ n^2 2^-53 event) are
/// redrawn from the same stream.
inline experiment_result run_cost_experiment(const experiment_config& config) {
  config.validate();
  experiment_result result;
  result.config = config;
  result.per_n.resize(config.n_values.size());

  for (std::size_t ni = 0; ni < config.n_values.size(); ++ni) {
    const std::size_t n = config.n_values[ni];
    n_result& nr = result.per_n[ni];
    nr.n = n;
    const std::size_t reps = config.replicates;
    const std::size_t n_s = config.s_values.size();
    std::vector<std::vector<std::int64_t>> at_s(n_s, std::vector<std::int64_t>(reps, 0));
    std::vector<std::int64_t> at_xi(config.uniform_query ? reps : 0, 0);
    std::vector<double> integral(config.record_profile ? reps : 0, 0.0);
    std::vector<std::int64_t> worst(config.record_profile ? reps : 0, 0);

    parallel_for(reps, config.threads, [&](std::size_t rep) {
      rng_stream rng = substream(config.master_seed, rep, ni);
      search_tree tree;
      for (int attempt = 0;; ++attempt) {
        const std::size_t count =
            config.poissonized && n > 0 ? poisson_point_count(static_cast<double>(n), rng) : n;
        const std::vector<point> pts = sample_uniform_points(count, rng);
        try {
          tree = build(pts, config.kind, &rng);
          break;
        } catch (const duplicate_coordinate_error&) {
          if (attempt >= 16) throw;
        }
      }
      for (std::size_t si = 0; si < n_s; ++si) at_s[si][rep] = partial_match_cost(tree, config.s_values[si]);
      if (config.uniform_query) at_xi[rep] = partial_match_cost(tree, rng.next_double());
      if (config.record_profile) {
        const cost_profile prof = compute_cost_profile(tree);
        integral[rep] = prof.integral();
        worst[rep] = prof.max_value();
      }
    });

    std::vector<double> buf(reps);
    auto to_double = [&buf](const std::vector<std::int64_t>& xs) {
      for (std::size_t i = 0; i < xs.size(); ++i) buf[i] = static_cast<double>(xs[i]);
      return std::span<const double>(buf.data(), xs.size());
    };
    nr.at_s.resize(n_s);
    for (std::size_t si = 0; si < n_s; ++si) nr.at_s[si] = summarize_cell(to_double(at_s[si]));
    if (config.uniform_query) nr.at_uniform = summarize_cell(to_double(at_xi));
    if (config.record_profile) {
      nr.profile_integral = summarize_cell(integral);
      nr.worst_cost = summarize_cell(to_double(worst));
    }
    if (config.retain_observations) {
      nr.raw_at_s = std::move(at_s);
      nr.raw_at_uniform = std::move(at_xi);
      nr.raw_integral = std::move(integral);
      nr.raw_worst = std::move(worst);
    }
  }

  if (config.n_values.size() >= 3) {
    char label[48];
    std::vector<std::pair<double, double>> pts(result.per_n.size());
    auto try_fit = [&result, &pts](const char* name) {
      try {
        result.fits.push_back({name, fit_exponent(pts)});
      } catch (const std::invalid_argument&) {
        // degenerate column (zero or negative means); skip the fit
      }
    };
    if (config.uniform_query) {
      // +1 cancels the leading correction of E[C_n(xi)] = kappa n^beta - 1 + ...
      for (std::size_t i = 0; i < result.per_n.size(); ++i)
        pts[i] = {static_cast<double>(result.per_n[i].n), result.per_n[i].at_uniform.mean + 1.0};
      try_fit("uniform_query_mean_plus_1");
    }
    for (std::size_t si = 0; si < config.s_values.size(); ++si) {
      for (std::size_t i = 0; i < result.per_n.size(); ++i)
        pts[i] = {static_cast<double>(result.per_n[i].n), result.per_n[i].at_s[si].mean};
      std::snprintf(label, sizeof label, "mean_at_s=%.15g", config.s_values[si]);
      try_fit(label);
    }
  }
  return result;
}

/// Least squares fit of log(value) = exponent log(n) + log(amplitude).
inline fit_result fit_exponent(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 3) throw std::invalid_argument("fit_exponent: need at least 3 points");
  std::vector<double> lx(pairs.size()), ly(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!(pairs[i].first > 0.0) || !(pairs[i].second > 0.0))
      throw std::invalid_argument("fit_exponent: all inputs must be positive");
    lx[i] = std::log(pairs[i].first);
    ly[i] = std::log(pairs[i].second);
  }
  const double n = static_cast<double>(pairs.size());
  const double mx = neumaier_sum(lx) / n;
  const double my = neumaier_sum(ly) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_exponent: n values must not all coincide");
  fit_result fit;
  fit.exponent = sxy / sxx;
  fit.amplitude = std::exp(my - fit.exponent * mx);
  double ss_res = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double e = ly[i] - (my + fit.exponent * (lx[i] - mx));
    ss_res += e * e;
  }
  fit.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  fit.exponent_std_error = pairs.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
  return fit;
}

/// Fit of the uniform-query mean over n. `shift` is added to each mean before
/// the log-log fit; +1 cancels the leading correction term of the expansion
/// E[C_n(xi)] = kappa n^beta - 1 + O(n^{beta-1}).
inline fit_result fit_uniform_mean(const experiment_result& result, double shift = 1.0) {
  std::vector<std::pair<double, double>> pts;
  for (const n_result& nr : result.per_n)
    pts.emplace_back(static_cast<double>(nr.n), nr.at_uniform.mean + shift);
  return fit_exponent(pts);
}

inline fit_result fit_fixed_s_mean(const experiment_result& result, std::size_t s_index, double shift = 0.0) {
  std::vector<std::pair<double, double>> pts;
  for (const n_result& nr : result.per_n)
    pts.emplace_back(static_cast<double>(nr.n), nr.at_s.at(s_index).mean + shift);
  return fit_exponent(pts);
}

struct theory_row {
  std::string label;
  std::size_t n = 0;
  double s = -1.0;  // negative when not applicable
  double observed = 0.0;
  double predicted = 0.0;
  double ratio = 0.0;
  double z = 0.0;
};

struct theory_report {
  std::vector<theory_row> rows;
};

struct sup_reference {
  double mean = 0.0;       ///< estimate of E[sup Z]
  double std_error = 0.0;
};

/// Observed-vs-predicted table for every summary the theory pins down. The
/// fixed-s variance is compared against both candidate normalizations (with
/// and without the k1^2 factor); see README findings for the adjudication.
inline theory_report compare_to_theory(const experiment_result& result,
                                       std::optional<sup_reference> sup_ref = std::nullopt) {
  const constants_table& c = constants();
  theory_report report;
  auto add = [&report](std::string label, std::size_t n, double s, double observed, double predicted, double se) {
    theory_row row;
    row.label = std::move(label);
    row.n = n;
    row.s = s;
    row.observed = observed;
    row.predicted = predicted;
    row.ratio = predicted != 0.0 ? observed / predicted : std::numeric_limits<double>::quiet_NaN();
    row.z = se > 0.0 ? (observed - predicted) / se : 0.0;
    report.rows.push_back(row);
  };

  for (const n_result& nr : result.per_n) {
    const double nd = static_cast<double>(nr.n);
    const double nb = std::pow(nd, c.beta_exp);
    const double n2b = nb * nb;
    if (nr.at_uniform.count > 0) {
      add("mean_uniform_query", nr.n, -1.0, nr.at_uniform.mean, c.kappa * nb - 1.0, nr.at_uniform.std_error);
      const double var_se = nr.at_uniform.variance * std::sqrt(2.0 / std::max<std::size_t>(nr.at_uniform.count - 1, 1));
      add("var_uniform_query", nr.n, -1.0, nr.at_uniform.variance, c.k4 * n2b, var_se);
    }
    for (std::size_t si = 0; si < result.config.s_values.size(); ++si) {
      const double s = result.config.s_values[si];
      const cell_summary& cell = nr.at_s[si];
      const double shape = std::pow(s * (1.0 - s), c.beta_exp);
      add("mean_fixed_s", nr.n, s, cell.mean, c.k1 * mean_curve(s) * nb, cell.std_error);
      if (s > 0.0 && s < 1.0) {
        const double var_se = cell.variance * std::sqrt(2.0 / std::max<std::size_t>(cell.count - 1, 1));
        add("var_fixed_s_plain", nr.n, s, cell.variance, (c.c2 - 1.0) * shape * n2b, var_se);
        add("var_fixed_s_k1sq", nr.n, s, cell.variance, c.k1 * c.k1 * (c.c2 - 1.0) * shape * n2b, var_se);
      }
    }
    if (nr.worst_cost.count > 0 && sup_ref) {
      const double observed = nr.worst_cost.mean / nb;
      const double se = std::hypot(nr.worst_cost.std_error / nb, c.k1 * sup_ref->std_error);
      add("mean_worst_query_over_n_beta", nr.n, -1.0, observed, c.k1 * sup_ref->mean, se);
    }
  }
  return report;
}

// ---- serialization --------------------------------------------------------

inline void to_json(nlohmann::json& j, const cell_summary& c) {
  j = {{"mean", c.mean}, {"variance", c.variance}, {"std_error", c.std_error}, {"count", c.count}};
}

inline void from_json(const nlohmann::json& j, cell_summary& c) {
  c.mean = j.value("mean", 0.0);
  c.variance = j.value("variance", 0.0);
  c.std_error = j.value("std_error", 0.0);
  c.count = j.value("count", std::size_t{0});
}

inline void to_json(nlohmann::json& j, const experiment_config& c) {
  j = {{"kind", to_string(c.kind)},
       {"n_values", c.n_values},
       {"s_values", c.s_values},
       {"uniform_query", c.uniform_query},
       {"replicates", c.replicates},
       {"master_seed", c.master_seed},
       {"poissonized", c.poissonized},
       {"record_profile", c.record_profile},
       {"retain_observations", c.retain_observations}};
}

inline void from_json(const nlohmann::json& j, experiment_config& c) {
  c.kind = tree_kind_from_string(j.at("kind").get<std::string>());
  c.n_values = j.at("n_values").get<std::vector<std::size_t>>();
  c.s_values = j.at("s_values").get<std::vector<double>>();
  c.uniform_query = j.at("uniform_query").get<bool>();
  c.replicates = j.at("replicates").get<std::size_t>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.poissonized = j.at("poissonized").get<bool>();
  c.record_profile = j.value("record_profile", true);
  c.retain_observations = j.value("retain_observations", false);
}

inline void to_json(nlohmann::json& j, const n_result& r) {
  j = {{"n", r.n}, {"at_s", r.at_s}};
  if (r.at_uniform.count > 0) j["at_uniform"] = r.at_uniform;
  if (r.profile_integral.count > 0) {
    j["profile_integral"] = r.profile_integral;
    j["worst_cost"] = r.worst_cost;
  }
  if (!r.raw_at_s.empty() || !r.raw_at_uniform.empty()) {
    j["raw_at_s"] = r.raw_at_s;
    j["raw_at_uniform"] = r.raw_at_uniform;
    j["raw_integral"] = r.raw_integral;
    j["raw_worst"] = r.raw_worst;
  }
}

inline void from_json(const nlohmann::json& j, n_result& r) {
  r.n = j.at("n").get<std::size_t>();
  r.at_s = j.at("at_s").get<std::vector<cell_summary>>();
  if (j.contains("at_uniform")) r.at_uniform = j.at("at_uniform").get<cell_summary>();
  if (j.contains("profile_integral")) {
    r.profile_integral = j.at("profile_integral").get<cell_summary>();
    r.worst_cost = j.at("worst_cost").get<cell_summary>();
  }
  if (j.contains("raw_at_s")) {
    r.raw_at_s = j.at("raw_at_s").get<std::vector<std::vector<std::int64_t>>>();
    r.raw_at_uniform = j.at("raw_at_uniform").get<std::vector<std::int64_t>>();
    r.raw_integral = j.at("raw_integral").get<std::vector<double>>();
    r.raw_worst = j.at("raw_worst").get<std::vector<std::int64_t>>();
  }
}

inline void to_json(nlohmann::json& j, const labeled_fit& f) {
  j = {{"label", f.label},
       {"exponent", f.fit.exponent},
       {"amplitude", f.fit.amplitude},
       {"r2", f.fit.r2},
       {"exponent_std_error", f.fit.exponent_std_error},
       {"exponent_ci95",
        {f.fit.exponent - 1.96 * f.fit.exponent_std_error, f.fit.exponent + 1.96 * f.fit.exponent_std_error}}};
}

inline void from_json(const nlohmann::json& j, labeled_fit& f) {
  f.label = j.at("label").get<std::string>();
  f.fit.exponent = j.at("exponent").get<double>();
  f.fit.amplitude = j.at("amplitude").get<double>();
  f.fit.r2 = j.at("r2").get<double>();
  f.fit.exponent_std_error = j.at("exponent_std_error").get<double>();
}

inline constexpr int result_schema_version = 1;

inline nlohmann::json result_to_json(const experiment_result& result) {
  nlohmann::json j;
  j["schema_version"] = result_schema_version;
  j["config"] = result.config;
  j["results"] = result.per_n;
  if (!result.fits.empty()) j["fits"] = result.fits;
  return j;
}

inline experiment_result result_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != result_schema_version)
    throw std::runtime_error("experiment result: unsupported schema_version");
  experiment_result r;
  r.config = j.at("config").get<experiment_config>();
  r.per_n = j.at("results").get<std::vector<n_result>>();
  if (j.contains("fits")) r.fits = j.at("fits").get<std::vector<labeled_fit>>();
  return r;
}

inline void to_json(nlohmann::json& j, const theory_row& r) {
  j = {{"label", r.label}, {"n", r.n},         {"observed", r.observed},
       {"predicted", r.predicted}, {"ratio", r.ratio}, {"z", r.z}};
  if (r.s >= 0.0) j["s"] = r.s;
}

inline nlohmann::json report_to_json(const theory_report& report) {
  nlohmann::json j;
  j["schema_version"] = result_schema_version;
  j["rows"] = report.rows;
  return j;
}

/// CSV rows: kind,n,s_or_xi,replicates,mean,var,stderr. The s_or_xi column
/// holds the query position, "xi" for the uniform query, or the name of a
/// per-replicate summary ("profile_integral", "worst_cost").
inline void write_result_csv(const experiment_result& result, std::ostream& out) {
  out << "kind,n,s_or_xi,replicates,mean,var,stderr\n";
  char buf[256];
  const char* kind = to_string(result.config.kind);
  auto row = [&](std::size_t n, const std::string& s_label, const cell_summary& c) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%s,%zu,%.15g,%.15g,%.15g\n", kind, n, s_label.c_str(), c.count, c.mean,
                  c.variance, c.std_error);
    out << buf;
  };
  char sbuf[48];
  for (const n_result& nr : result.per_n) {
    for (std::size_t si = 0; si < result.config.s_values.size(); ++si) {
      std::snprintf(sbuf, sizeof sbuf, "%.15g", result.config.s_values[si]);
      row(nr.n, sbuf, nr.at_s[si]);
    }
    if (nr.at_uniform.count > 0) row(nr.n, "xi", nr.at_uniform);
    if (nr.profile_integral.count > 0) {
      row(nr.n, "profile_integral", nr.profile_integral);
      row(nr.n, "worst_cost", nr.worst_cost);
    }
  }
}

inline void print_report(const theory_report& report, std::ostream& out) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-30s %9s %9s %12s %12s %8s %8s\n", "label", "n", "s", "observed", "predicted",
                "ratio", "z");
  out << buf;
  for (const theory_row& r : report.rows) {
    char scol[16];
    if (r.s >= 0.0)
      std::snprintf(scol, sizeof scol, "%.4g", r.s);
    else
      std::snprintf(scol, sizeof scol, "-");
    std::snprintf(buf, sizeof buf, "%-30s %9zu %9s %12.6g %12.6g %8.4f %8.2f\n", r.label.c_str(), r.n, scol,
                  r.observed, r.predicted, r.ratio, r.z);
    out << buf;
  }
}

}  // namespace pmq
