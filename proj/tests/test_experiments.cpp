#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "pmq/experiments.hpp"

using namespace pmq;

namespace {

experiment_config small_config() {
  experiment_config cfg;
  cfg.n_values = {64, 128};
  cfg.s_values = {0.5};
  cfg.uniform_query = true;
  cfg.replicates = 40;
  cfg.master_seed = 9001;
  cfg.retain_observations = true;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  experiment_config cfg = small_config();
  cfg.replicates = 1;
  REQUIRE_THROWS_AS(run_cost_experiment(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.n_values = {128, 64};
  REQUIRE_THROWS_AS(run_cost_experiment(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.s_values.clear();
  cfg.uniform_query = false;
  REQUIRE_THROWS_AS(run_cost_experiment(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.s_values = {1.5};
  REQUIRE_THROWS_AS(run_cost_experiment(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.max_total_points = 100;
  REQUIRE_THROWS_AS(run_cost_experiment(cfg), resource_limit_error);
}

TEST_CASE("single point trees cost exactly one") {
  experiment_config cfg;
  cfg.n_values = {1};
  cfg.s_values = {0.0, 0.3, 1.0};
  cfg.uniform_query = true;
  cfg.replicates = 25;
  cfg.master_seed = 4;
  const experiment_result r = run_cost_experiment(cfg);
  for (const cell_summary& c : r.per_n[0].at_s) {
    REQUIRE(c.mean == 1.0);
    REQUIRE(c.variance == 0.0);
  }
  REQUIRE(r.per_n[0].at_uniform.mean == 1.0);
  REQUIRE(r.per_n[0].at_uniform.variance == 0.0);
  REQUIRE(r.per_n[0].worst_cost.mean == 1.0);
  REQUIRE(r.per_n[0].profile_integral.mean == 1.0);
}

TEST_CASE("fit_exponent on exact power laws") {
  std::vector<std::pair<double, double>> pts;
  for (double n : {16.0, 64.0, 256.0, 1024.0, 4096.0}) pts.emplace_back(n, 3.0 * std::sqrt(n));
  const fit_result fit = fit_exponent(pts);
  REQUIRE(fit.exponent == Catch::Approx(0.5).epsilon(1e-12));
  REQUIRE(fit.amplitude == Catch::Approx(3.0).epsilon(1e-12));
  REQUIRE(fit.r2 == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(fit.exponent_std_error < 1e-12);

  const constants_table& c = constants();
  pts.clear();
  for (int k = 10; k <= 17; ++k) {
    const double n = std::pow(2.0, k);
    pts.emplace_back(n, c.k1 * mean_curve(0.5) * std::pow(n, c.beta_exp));
  }
  const fit_result fb = fit_exponent(pts);
  REQUIRE(fb.exponent == Catch::Approx(c.beta_exp).epsilon(1e-12));
  REQUIRE(fb.amplitude == Catch::Approx(c.k1 * mean_curve(0.5)).epsilon(1e-10));
}

TEST_CASE("fit_exponent input validation") {
  std::vector<std::pair<double, double>> two = {{1.0, 1.0}, {2.0, 2.0}};
  REQUIRE_THROWS_AS(fit_exponent(two), std::invalid_argument);
  std::vector<std::pair<double, double>> neg = {{1.0, 1.0}, {2.0, -2.0}, {4.0, 3.0}};
  REQUIRE_THROWS_AS(fit_exponent(neg), std::invalid_argument);
}

TEST_CASE("results are identical across thread counts") {
  experiment_config cfg = small_config();
  cfg.threads = 1;
  const std::string one = result_to_json(run_cost_experiment(cfg)).dump();
  cfg.threads = 2;
  const std::string two = result_to_json(run_cost_experiment(cfg)).dump();
  cfg.threads = 7;
  const std::string seven = result_to_json(run_cost_experiment(cfg)).dump();
  REQUIRE(one == two);
  REQUIRE(one == seven);
}

TEST_CASE("per-replicate uniform query means track the profile integral") {
  rng_stream rng(606);
  for (int rep = 0; rep < 5; ++rep) {
    const auto pts = sample_uniform_points(256, rng);
    const search_tree t = build(pts, tree_kind::quadtree);
    const double integral = compute_cost_profile(t).integral();
    std::vector<double> costs(64);
    for (auto& c : costs) c = static_cast<double>(partial_match_cost(t, rng.next_double()));
    const summary_stats s = summarize(costs);
    REQUIRE(std::abs(s.mean - integral) <= 6.0 * s.std_error);
  }
}

TEST_CASE("poissonized mode draws Poisson counts and stays deterministic") {
  experiment_config cfg = small_config();
  cfg.poissonized = true;
  const experiment_result a = run_cost_experiment(cfg);
  const experiment_result b = run_cost_experiment(cfg);
  REQUIRE(result_to_json(a).dump() == result_to_json(b).dump());
  REQUIRE(a.per_n[1].at_uniform.mean > 0.0);
  // the fixed-n and Poissonized means agree at the coarse level
  cfg.poissonized = false;
  const experiment_result fixed = run_cost_experiment(cfg);
  REQUIRE(a.per_n[1].at_uniform.mean ==
          Catch::Approx(fixed.per_n[1].at_uniform.mean).epsilon(0.35));
}

TEST_CASE("different tree kinds run end to end") {
  for (tree_kind kind : {tree_kind::kd, tree_kind::relaxed_kd}) {
    experiment_config cfg = small_config();
    cfg.kind = kind;
    const experiment_result r = run_cost_experiment(cfg);
    REQUIRE(r.per_n[0].at_uniform.mean >= 1.0);
    REQUIRE(r.per_n[1].worst_cost.mean > r.per_n[1].at_uniform.mean);
  }
}

TEST_CASE("compare_to_theory closes the loop on synthetic inputs") {
  const constants_table& c = constants();
  experiment_result r;
  r.config.kind = tree_kind::quadtree;
  r.config.n_values = {1000, 10000};
  r.config.s_values = {0.5};
  r.config.uniform_query = true;
  for (std::size_t n : r.config.n_values) {
    n_result nr;
    nr.n = n;
    const double nb = std::pow(static_cast<double>(n), c.beta_exp);
    cell_summary uni;
    uni.mean = c.kappa * nb - 1.0;
    uni.variance = c.k4 * nb * nb;
    uni.count = 100;
    nr.at_uniform = uni;
    cell_summary fixed;
    fixed.mean = c.k1 * mean_curve(0.5) * nb;
    fixed.variance = c.k1 * c.k1 * (c.c2 - 1.0) * std::pow(0.25, c.beta_exp) * nb * nb;
    fixed.count = 100;
    nr.at_s.push_back(fixed);
    r.per_n.push_back(nr);
  }
  const theory_report report = compare_to_theory(r);
  REQUIRE(!report.rows.empty());
  for (const theory_row& row : report.rows) {
    INFO(row.label << " n=" << row.n);
    if (row.label == "var_fixed_s_plain") {
      REQUIRE(row.ratio == Catch::Approx(c.k1 * c.k1).epsilon(1e-10));
    } else {
      REQUIRE(row.ratio == Catch::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("fits are attached when the n grid supports them") {
  experiment_config cfg;
  cfg.n_values = {128, 512, 2048, 8192};
  cfg.s_values = {0.5};
  cfg.uniform_query = true;
  cfg.replicates = 150;
  cfg.master_seed = 77;
  cfg.record_profile = false;
  const experiment_result r = run_cost_experiment(cfg);
  REQUIRE(r.fits.size() == 2);
  REQUIRE(r.fits[0].label == "uniform_query_mean_plus_1");
  REQUIRE(r.fits[1].label == "mean_at_s=0.5");
  for (const labeled_fit& f : r.fits) {
    INFO(f.label);
    REQUIRE(std::abs(f.fit.exponent - constants().beta_exp) < 0.08);
    REQUIRE(f.fit.r2 > 0.99);
    REQUIRE(f.fit.exponent_std_error > 0.0);
  }
  const nlohmann::json j = result_to_json(r);
  REQUIRE(j.contains("fits"));
  const experiment_result back = result_from_json(j);
  REQUIRE(back.fits.size() == 2);
  REQUIRE(back.fits[1].fit.exponent == r.fits[1].fit.exponent);
  // two n values are not enough for a fit
  experiment_config small = small_config();
  REQUIRE(run_cost_experiment(small).fits.empty());
}

TEST_CASE("json round trip preserves the summaries") {
  const experiment_result r = run_cost_experiment(small_config());
  const nlohmann::json j = result_to_json(r);
  const experiment_result back = result_from_json(j);
  REQUIRE(back.per_n.size() == r.per_n.size());
  REQUIRE(back.config.master_seed == r.config.master_seed);
  REQUIRE(back.per_n[0].at_uniform.mean == r.per_n[0].at_uniform.mean);
  REQUIRE(back.per_n[1].at_s[0].variance == r.per_n[1].at_s[0].variance);
  REQUIRE(result_to_json(back)["results"] == j["results"]);
}

TEST_CASE("csv output shape") {
  experiment_config cfg = small_config();
  cfg.retain_observations = false;
  const experiment_result r = run_cost_experiment(cfg);
  std::ostringstream out;
  write_result_csv(r, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "kind,n,s_or_xi,replicates,mean,var,stderr");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    REQUIRE(line.rfind("quadtree,", 0) == 0);
    ++rows;
  }
  // per n: one s row, one xi row, integral and worst rows
  REQUIRE(rows == r.per_n.size() * 4);
}
