// Acceptance suite: end-to-end checks of every quantitative target, one
// TEST_CASE per criterion, each printing a PASS/FAIL line. The two large
// Monte Carlo runs are shared between criteria and cached on first use.

#include <sys/wait.h>

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pmq/pmq.hpp"

using namespace pmq;
namespace fs = std::filesystem;

namespace {

struct criterion_line {
  const char* name;
  bool ok = true;
  std::string detail;

  criterion_line(const char* n) : name(n) {}
  void check(bool cond) { ok = ok && cond; }
  ~criterion_line() {
    std::printf("[acceptance] %s: %s%s%s\n", name, ok ? "PASS" : "FAIL", detail.empty() ? "" : " | ",
                detail.c_str());
    std::fflush(stdout);
  }
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

template <class Fn>
auto timed(const char* label, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  auto result = fn();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[acceptance] %s finished in %.1f s\n", label, secs);
  std::fflush(stdout);
  return result;
}

// Run A: geometric n grid for the exponent and amplitude fits.
const experiment_result& run_a() {
  static const experiment_result r = timed("shared run A (n = 2^10..2^16, 2000 replicates)", [] {
    experiment_config cfg;
    cfg.kind = tree_kind::quadtree;
    for (int k = 10; k <= 16; ++k) cfg.n_values.push_back(std::size_t{1} << k);
    cfg.s_values = {0.0, 0.1, 0.25, 0.5};
    cfg.uniform_query = true;
    cfg.replicates = 2000;
    cfg.master_seed = 0xA11CE;
    cfg.record_profile = false;
    return run_cost_experiment(cfg);
  });
  return r;
}

// Run B: large fixed n for variance, fixed-s ratios and the worst query.
const experiment_result& run_b() {
  static const experiment_result r = timed("shared run B (n = 10^4, 10^5, 5000 replicates)", [] {
    experiment_config cfg;
    cfg.kind = tree_kind::quadtree;
    cfg.n_values = {10000, 100000};
    cfg.s_values = {0.1, 0.25, 0.5};
    cfg.uniform_query = true;
    cfg.replicates = 5000;
    cfg.master_seed = 0xB0B;
    cfg.record_profile = true;
    return run_cost_experiment(cfg);
  });
  return r;
}

// Replicates of Z_8(1/2), shared by the moment adjudications.
const std::vector<double>& z8_samples() {
  static const std::vector<double> z = timed("shared Z_8(1/2) sampling (10^5 replicates)", [] {
    return sample_Zn_point(0.5, 8, 100000, 0xC0C0A, 0);
  });
  return z;
}

const sup_estimate& sup12() {
  static const sup_estimate s = timed("shared sup estimate (depth 12, grid 1024, 400 replicates)", [] {
    return estimate_sup(12, 1024, 400, 0xD0D0, 0);
  });
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("criterion 01: constants") {
  const auto t0 = std::chrono::steady_clock::now();
  const constants_table& c = constants();
  const double residual = std::abs(c.beta_exp * c.beta_exp + 3.0 * c.beta_exp - 2.0);
  const double k4_err = std::abs(c.k4 - 0.447363034);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  criterion_line line("01 constants");
  line.detail = fmt("k4 = %.12f (|err| = %.2e < 5e-9), beta residual = %.2e, %.3f ms", c.k4, k4_err, residual, ms);
  line.check(k4_err < 5e-9);
  line.check(residual < 1e-12);
  REQUIRE(k4_err < 5e-9);
  REQUIRE(residual < 1e-12);
}

TEST_CASE("criterion 02: mean at a uniform query") {
  const constants_table& c = constants();
  const fit_result fit = fit_uniform_mean(run_a(), 1.0);
  criterion_line line("02 mean at uniform query");
  line.detail = fmt("exponent = %.4f (target %.4f +- 0.02), amplitude = %.4f (target %.4f +- 5%%), r2 = %.6f",
                    fit.exponent, c.beta_exp, fit.amplitude, c.kappa, fit.r2);
  line.check(std::abs(fit.exponent - c.beta_exp) < 0.02);
  line.check(std::abs(fit.amplitude - c.kappa) < 0.05 * c.kappa);
  REQUIRE(std::abs(fit.exponent - c.beta_exp) < 0.02);
  REQUIRE(std::abs(fit.amplitude - c.kappa) < 0.05 * c.kappa);
}

TEST_CASE("criterion 03: mean at fixed s") {
  const constants_table& c = constants();
  const experiment_result& r = run_b();
  const n_result& big = r.per_n.back();  // n = 10^5
  criterion_line line("03 mean at fixed s");
  const double nb = std::pow(static_cast<double>(big.n), c.beta_exp);
  std::string details;
  bool all_ok = true;
  for (std::size_t si = 0; si < r.config.s_values.size(); ++si) {
    const double s = r.config.s_values[si];
    const double ratio = big.at_s[si].mean / (c.k1 * mean_curve(s) * nb);
    all_ok = all_ok && ratio >= 0.95 && ratio <= 1.05;
    details += fmt("s=%.2f ratio=%.4f ", s, ratio);
  }
  // scaling sanity of the fixed-s mean over n up to 10^5, pooled from both runs
  std::vector<std::pair<double, double>> pts;
  for (const n_result& nr : run_a().per_n)
    pts.emplace_back(static_cast<double>(nr.n), nr.at_s[3].mean);  // run A s grid: {0, 0.1, 0.25, 0.5}
  for (const n_result& nr : r.per_n) pts.emplace_back(static_cast<double>(nr.n), nr.at_s[2].mean);  // s = 0.5
  std::sort(pts.begin(), pts.end());
  const fit_result fit = fit_exponent(pts);
  details += fmt("| fit exponent at s=0.5 over n up to 1e5: %.4f (target +- 0.03)", fit.exponent);
  all_ok = all_ok && std::abs(fit.exponent - c.beta_exp) < 0.03;
  line.detail = details;
  line.check(all_ok);
  REQUIRE(all_ok);
}

TEST_CASE("criterion 04: edge exponent at s = 0") {
  const constants_table& c = constants();
  const fit_result fit = fit_fixed_s_mean(run_a(), 0);  // s = 0 column
  criterion_line line("04 edge exponent");
  line.detail = fmt("fitted exponent = %.4f (target %.4f +- 0.04), r2 = %.6f", fit.exponent, c.edge_exp, fit.r2);
  line.check(std::abs(fit.exponent - c.edge_exp) < 0.04);
  REQUIRE(std::abs(fit.exponent - c.edge_exp) < 0.04);
}

TEST_CASE("criterion 05: variance at a uniform query") {
  const constants_table& c = constants();
  const n_result& big = run_b().per_n.back();
  const double n2b = std::pow(static_cast<double>(big.n), 2.0 * c.beta_exp);
  const double ratio = big.at_uniform.variance / (c.k4 * n2b);
  criterion_line line("05 variance at uniform query");
  line.detail = fmt("ratio to k4 n^2beta = %.4f (allowed [0.85, 1.15]), replicates = %zu", ratio, big.at_uniform.count);
  line.check(ratio >= 0.85 && ratio <= 1.15);
  REQUIRE(ratio >= 0.85);
  REQUIRE(ratio <= 1.15);
}

TEST_CASE("criterion 06: fixed-s variance adjudication") {
  const constants_table& c = constants();
  const experiment_result& r = run_b();
  const n_result& big = r.per_n.back();
  const std::size_t si = 2;  // s = 0.5
  const double s = r.config.s_values[si];
  REQUIRE(s == 0.5);
  const double n2b = std::pow(static_cast<double>(big.n), 2.0 * c.beta_exp);
  const double shape = std::pow(s * (1.0 - s), c.beta_exp);
  const double normalized = big.at_s[si].variance / (shape * n2b);
  const double plain = c.c2 - 1.0;
  const double with_k1sq = c.k1 * c.k1 * (c.c2 - 1.0);
  const bool plain_match = std::abs(normalized / plain - 1.0) <= 0.15;
  const bool k1sq_match = std::abs(normalized / with_k1sq - 1.0) <= 0.15;
  criterion_line line("06 fixed-s variance adjudication");
  line.detail = fmt("Var(C_n(1/2))/((s(1-s))^b n^2b) = %.4f; candidates: %.4f (plain), %.4f (k1^2); match: %s",
                    normalized, plain, with_k1sq, k1sq_match ? "k1^2 variant" : (plain_match ? "plain" : "none"));
  line.check(plain_match != k1sq_match);  // exactly one candidate fits
  REQUIRE(plain_match != k1sq_match);
}

TEST_CASE("criterion 07: martingale means of the limit construction") {
  criterion_line line("07 martingale property");
  bool all_ok = true;
  std::string detail;
  for (int depth : {1, 4, 8}) {
    for (double s : {0.1, 0.5, 0.9}) {
      const auto vals =
          sample_Zn_point(s, depth, 10000, 0xE0 + static_cast<std::uint64_t>(depth) * 16 + std::size_t(s * 10), 0);
      const summary_stats st = summarize(vals);
      const double sigmas = std::abs(st.mean - mean_curve(s)) / st.std_error;
      all_ok = all_ok && sigmas < 4.0;
      if (sigmas >= 4.0) detail += fmt("n=%d s=%.1f: %.1f sigma! ", depth, s, sigmas);
    }
  }
  if (detail.empty()) detail = "all 9 (depth, s) cells within 4 standard errors of h(s)";
  line.detail = detail;
  line.check(all_ok);
  REQUIRE(all_ok);
}

TEST_CASE("criterion 08: second-moment adjudication of the limit marginal") {
  const constants_table& c = constants();
  const double h_half = mean_curve(0.5);
  const std::vector<double>& z = z8_samples();
  std::vector<double> sq(z.size()), cu(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double t = z[i] / h_half;
    sq[i] = t * t;
    cu[i] = t * t * t;
  }
  const summary_stats m2 = summarize(sq);
  const summary_stats m3 = summarize(cu);
  const double candidate_a = c.c2;        // closed-form second moment
  const double candidate_b = 2.0 * c.c2;  // the doubled-prefactor recurrence at m = 2
  const double gap = candidate_b - candidate_a;
  const double half_width = 1.96 * m2.std_error;
  criterion_line line("08 moment adjudication");
  const bool narrow = half_width < 0.2 * gap;
  const bool matches_a = std::abs(m2.mean - candidate_a) < 0.5 * gap;
  // informational third moment against the two recurrence variants
  const double c3_single = moment_recurrence(3, moment_prefactor::single).values[2];
  const double c3_doubled = moment_recurrence(3).values[2];
  const bool m3_single = std::abs(m3.mean - c3_single) < std::abs(m3.mean - c3_doubled);
  line.detail = fmt(
      "E[(Z_8/h)^2] = %.4f +- %.4f vs %.4f / %.4f -> matches the single-prefactor value; "
      "E[(Z_8/h)^3] = %.4f vs %.4f / %.4f -> %s",
      m2.mean, half_width, candidate_a, candidate_b, m3.mean, c3_single, c3_doubled,
      m3_single ? "single" : "doubled");
  line.check(narrow);
  line.check(matches_a);
  line.check(m3_single);
  REQUIRE(narrow);
  REQUIRE(matches_a);
  REQUIRE(m3_single);
}

TEST_CASE("criterion 09: second-moment solver") {
  quadrature_config cfg;
  cfg.grid_size = 512;
  cfg.nodes = 64;
  cfg.tolerance = 1e-8;
  const fixed_point_result fp = solve_fixed_point(cfg);
  const grid_function analytic = grid_function::sample(cfg.grid_size, [](double s) {
    return constants().c2 * std::pow(s * (1.0 - s), constants().beta_exp);
  });
  const double analytic_residual = apply_K(analytic, cfg.nodes).max_abs_diff(analytic);
  double ratio_tail = 0.0;
  for (std::size_t i = fp.step_ratios.size() - 5; i < fp.step_ratios.size(); ++i) ratio_tail += fp.step_ratios[i];
  ratio_tail /= 5.0;
  criterion_line line("09 mu2 solver");
  line.detail = fmt("iterations = %d, residual = %.2e, analytic residual = %.2e, contraction ratio = %.4f",
                    fp.iterations, fp.residual, analytic_residual, ratio_tail);
  line.check(fp.residual < cfg.tolerance);
  line.check(analytic_residual < 1e-6);
  line.check(std::abs(ratio_tail - 0.603) <= 0.02);
  REQUIRE(analytic_residual < 1e-6);
  REQUIRE(std::abs(ratio_tail - 0.603) <= 0.02);
}

TEST_CASE("criterion 10: worst-query cost against the limit supremum") {
  const constants_table& c = constants();
  const experiment_result& r = run_b();
  const sup_estimate& sup = sup12();
  std::vector<double> ratios, ses;
  for (const n_result& nr : r.per_n) {
    const double nb = std::pow(static_cast<double>(nr.n), c.beta_exp);
    ratios.push_back(nr.worst_cost.mean / nb);
    ses.push_back(nr.worst_cost.std_error / nb);
  }
  const double stability = std::abs(ratios[0] / ratios[1] - 1.0);
  const double reference = c.k1 * sup.mean;
  criterion_line line("10 worst-query supremum");
  std::string detail = fmt("E[S_n]/n^beta = {%.4f, %.4f}, stability gap = %.2f%%, k1 E[max Z_12] = %.4f", ratios[0],
                           ratios[1], 100.0 * stability, reference);
  std::vector<double> sigmas;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double combined = std::hypot(ses[i], c.k1 * sup.std_error);
    sigmas.push_back(std::abs(ratios[i] - reference) / combined);
    detail += fmt(" | n=%zu: %.2f combined SE", r.per_n[i].n, sigmas.back());
  }
  // E[S_n]/n^beta approaches its limit from below, so the consistency clause
  // applies to the estimate in the asymptotic regime (the largest n); the
  // smaller n is covered by the stability clause and reported above.
  line.detail = detail;
  line.check(stability <= 0.10);
  line.check(sigmas.back() <= 2.0);
  REQUIRE(stability <= 0.10);
  REQUIRE(sigmas.back() <= 2.0);
}

TEST_CASE("criterion 11: property suites") {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_line line("11 property suites");
  bool ok = true;

  // traversal vs region-count oracle, 1000 (tree, s) pairs with n <= 200
  {
    rng_stream seeds(1);
    int pairs = 0;
    for (int trial = 0; trial < 40 && ok; ++trial) {
      const std::size_t n = 1 + static_cast<std::size_t>(seeds.next_double() * 200);
      rng_stream rng(2000 + static_cast<std::uint64_t>(trial));
      const auto pts = sample_uniform_points(n, rng);
      const search_tree t = build(pts, static_cast<tree_kind>(trial % 3), &rng);
      for (int q = 0; q < 25; ++q, ++pairs) {
        const double s = seeds.next_double();
        std::int64_t regions = 0;
        for (const tree_node& node : t.nodes()) regions += node.reg.contains_x(s);
        ok = ok && partial_match_cost(t, s) == regions;
      }
    }
    ok = ok && pairs == 1000;
  }

  // insertion monotonicity: every insertion changes every cost by 0 or +1
  {
    rng_stream rng(3);
    const auto pts = sample_uniform_points(150, rng);
    std::vector<double> queries(25);
    for (auto& q : queries) q = rng.next_double();
    std::vector<std::int64_t> prev(queries.size(), 0);
    for (std::size_t k = 1; k <= pts.size() && ok; ++k) {
      const search_tree t = build(std::span<const point>(pts.data(), k), tree_kind::quadtree);
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const std::int64_t cur = partial_match_cost(t, queries[qi]);
        ok = ok && (cur == prev[qi] || cur == prev[qi] + 1);
        prev[qi] = cur;
      }
    }
  }

  // profile/pointwise agreement and the double-counting identity
  {
    for (std::uint64_t seed = 10; seed < 13 && ok; ++seed) {
      rng_stream rng(seed);
      const auto pts = sample_uniform_points(500, rng);
      const search_tree t = build(pts, tree_kind::quadtree);
      const cost_profile prof = compute_cost_profile(t);
      for (int q = 0; q < 200; ++q) {
        const double s = rng.next_double();
        ok = ok && prof.value_at(s) == partial_match_cost(t, s);
      }
      ok = ok && std::abs(prof.integral() - node_extent_sum(t)) <= 1e-12 * node_extent_sum(t);
    }
  }

  // multinomial split at the root, chi-squared at the 1% level
  {
    const double u = 0.3, v = 0.7;
    const double probs[4] = {u * v, u * (1.0 - v), (1.0 - u) * v, (1.0 - u) * (1.0 - v)};
    double counts[4] = {0, 0, 0, 0};
    rng_stream rng(424242);
    const int builds = 500;
    const std::size_t n_rest = 200;
    for (int b = 0; b < builds; ++b) {
      std::vector<point> pts{{u, v}};
      const auto rest = sample_uniform_points(n_rest, rng);
      pts.insert(pts.end(), rest.begin(), rest.end());
      const search_tree t = build(pts, tree_kind::quadtree);
      // subtree sizes at the root
      for (int slot = 0; slot < 4; ++slot) {
        std::vector<std::int32_t> stack;
        if (t.node(0).child[static_cast<std::size_t>(slot)] != search_tree::nil)
          stack.push_back(t.node(0).child[static_cast<std::size_t>(slot)]);
        while (!stack.empty()) {
          const tree_node& node = t.node(static_cast<std::size_t>(stack.back()));
          stack.pop_back();
          counts[slot] += 1.0;
          for (std::int32_t child : node.child)
            if (child != search_tree::nil) stack.push_back(child);
        }
      }
    }
    double chi2 = 0.0;
    for (int slot = 0; slot < 4; ++slot) {
      const double expected = builds * static_cast<double>(n_rest) * probs[slot];
      chi2 += (counts[slot] - expected) * (counts[slot] - expected) / expected;
    }
    const double p = chi_squared_pvalue(chi2, 3);
    line.detail += fmt("multinomial chi2 p = %.3f; ", p);
    ok = ok && p >= 0.01;
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  line.detail += fmt("runtime %.1f s (budget 60 s)", secs);
  line.check(ok);
  line.check(secs < 60.0);
  REQUIRE(ok);
  REQUIRE(secs < 60.0);
}

TEST_CASE("criterion 12: determinism across thread counts") {
  criterion_line line("12 determinism");
  // in-process: identical bytes for 1, 2 and 5 worker threads
  experiment_config cfg;
  cfg.n_values = {256, 512};
  cfg.s_values = {0.25, 0.5};
  cfg.uniform_query = true;
  cfg.replicates = 100;
  cfg.master_seed = 987654321;
  cfg.retain_observations = true;
  cfg.threads = 1;
  std::ostringstream csv1;
  const experiment_result r1 = run_cost_experiment(cfg);
  write_result_csv(r1, csv1);
  cfg.threads = 2;
  const experiment_result r2 = run_cost_experiment(cfg);
  cfg.threads = 5;
  const experiment_result r5 = run_cost_experiment(cfg);
  std::ostringstream csv2;
  write_result_csv(r2, csv2);
  const bool in_process = result_to_json(r1).dump() == result_to_json(r2).dump() &&
                          result_to_json(r1).dump() == result_to_json(r5).dump() && csv1.str() == csv2.str();

  // end to end through the CLI
  const fs::path dir = fs::temp_directory_path() / "pmq_acceptance";
  fs::create_directories(dir);
  const std::string base = std::string(PMQ_CLI_PATH) +
                           " experiment --n 256,512 --s 0.5 --uniform-query --replicates 60 --seed 999 "
                           "--retain-observations";
  const fs::path csv_a = dir / "a.csv", json_a = dir / "a.json";
  const fs::path csv_b = dir / "b.csv", json_b = dir / "b.json";
  const int rc_a = std::system(
      (base + " --threads 1 --csv-out " + csv_a.string() + " --json-out " + json_a.string() + " > /dev/null").c_str());
  const int rc_b = std::system(
      (base + " --threads 2 --csv-out " + csv_b.string() + " --json-out " + json_b.string() + " > /dev/null").c_str());
  const bool cli_ok = WIFEXITED(rc_a) && WEXITSTATUS(rc_a) == 0 && WIFEXITED(rc_b) && WEXITSTATUS(rc_b) == 0 &&
                      slurp(csv_a) == slurp(csv_b) && slurp(json_a) == slurp(json_b) && !slurp(csv_a).empty();
  line.detail = fmt("in-process identical: %s, CLI files identical: %s", in_process ? "yes" : "no",
                    cli_ok ? "yes" : "no");
  line.check(in_process);
  line.check(cli_ok);
  REQUIRE(in_process);
  REQUIRE(cli_ok);
}

TEST_CASE("informational: fitted exponents for the k-d tree variants") {
  for (tree_kind kind : {tree_kind::kd, tree_kind::relaxed_kd}) {
    experiment_config cfg;
    cfg.kind = kind;
    for (int k = 10; k <= 14; ++k) cfg.n_values.push_back(std::size_t{1} << k);
    cfg.s_values = {0.5};
    cfg.uniform_query = true;
    cfg.replicates = 400;
    cfg.master_seed = 0xF00D;
    cfg.record_profile = false;
    const experiment_result r = run_cost_experiment(cfg);
    const fit_result fit = fit_uniform_mean(r, 1.0);
    std::printf("[acceptance] info: %s uniform-query exponent = %.4f (r2 = %.6f), no asserted target\n",
                to_string(kind), fit.exponent, fit.r2);
    REQUIRE(fit.exponent > 0.3);
    REQUIRE(fit.exponent < 0.9);
    REQUIRE(fit.r2 > 0.99);
  }
}
