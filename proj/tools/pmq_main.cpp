// pmq: partial match query cost analysis for random quadtrees and k-d trees.
//
// Subcommands expose the library pieces: closed-form constants, tree
// construction and cost profiles, Monte Carlo cost experiments, limit
// process simulation, and the second-moment integral equation solver.
// All randomness is seeded; the default seed is the fixed constant below,
// never the clock.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmq/pmq.hpp"

namespace {

constexpr std::uint64_t kDefaultSeed = 97531;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

std::vector<pmq::point> load_points_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open points file: " + path);
  return pmq::read_points_csv(in);
}

// Fixed 15-significant-digit formatting for data output.
std::string fmt15(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

struct tree_options {
  std::size_t n = 1000;
  std::string kind = "quadtree";
  std::uint64_t seed = kDefaultSeed;
  std::string points_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n", n, "number of uniform random points")->capture_default_str();
    cmd->add_option("--kind", kind, "tree kind: quadtree, kd, relaxed_kd")
        ->check(CLI::IsMember({"quadtree", "kd", "relaxed_kd"}))
        ->capture_default_str();
    cmd->add_option("--seed", seed, "rng seed (fixed default, not time based)")->capture_default_str();
    cmd->add_option("--points", points_file, "read points from a CSV file (columns x,y) instead of sampling");
  }

  pmq::search_tree build_tree() const {
    pmq::rng_stream rng = pmq::substream(seed, 0, 0x7e);
    const std::vector<pmq::point> pts =
        points_file.empty() ? pmq::sample_uniform_points(n, rng) : load_points_file(points_file);
    return pmq::build(pts, pmq::tree_kind_from_string(kind), &rng);
  }
};

void cmd_constants(const std::string& json_out) {
  const pmq::constants_table& c = pmq::constants();
  std::string text;
  text += "{\n";
  text += "  \"schema_version\": 1,\n";
  text += "  \"beta\": " + fmt15(c.beta_exp) + ",\n";
  text += "  \"kappa\": " + fmt15(c.kappa) + ",\n";
  text += "  \"k1\": " + fmt15(c.k1) + ",\n";
  text += "  \"c2\": " + fmt15(c.c2) + ",\n";
  text += "  \"k4\": " + fmt15(c.k4) + ",\n";
  text += "  \"var_z_xi\": " + fmt15(c.var_z_xi) + ",\n";
  text += "  \"edge_exp\": " + fmt15(c.edge_exp) + "\n";
  text += "}\n";
  std::cout << text;
  if (!json_out.empty()) open_output(json_out) << text;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"partial match query cost analysis in random quadtrees and k-d trees"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a key=value config file");

  // constants
  auto* c_cmd = app.add_subcommand("constants", "print the closed-form constants table as JSON");
  auto c_json = std::make_shared<std::string>();
  c_cmd->add_option("--json-out", *c_json, "also write the JSON to a file");
  c_cmd->callback([c_json] { cmd_constants(*c_json); });

  // build-demo
  auto* bd_cmd = app.add_subcommand("build-demo", "build one tree and print a JSON summary");
  auto bd_opts = std::make_shared<tree_options>();
  bd_opts->attach(bd_cmd);
  bd_cmd->callback([bd_opts] {
    const pmq::search_tree tree = bd_opts->build_tree();
    const pmq::cost_profile prof = pmq::compute_cost_profile(tree);
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = bd_opts->kind;
    j["size"] = tree.size();
    j["profile_breakpoints"] = prof.breakpoints.size();
    j["profile_integral"] = prof.integral();
    j["worst_cost"] = prof.max_value();
    j["worst_s"] = prof.argmax_left();
    std::cout << j.dump(2) << "\n";
  });

  // cost
  auto* cost_cmd = app.add_subcommand("cost", "partial match cost at fixed query lines");
  auto cost_opts = std::make_shared<tree_options>();
  cost_opts->attach(cost_cmd);
  auto cost_s = std::make_shared<std::vector<double>>();
  cost_cmd->add_option("--s", *cost_s, "query positions in [0,1]")
      ->required()
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  cost_cmd->callback([cost_opts, cost_s] {
    const pmq::search_tree tree = cost_opts->build_tree();
    std::cout << "s,cost\n";
    for (double s : *cost_s)
      std::cout << fmt15(s) << "," << pmq::partial_match_cost(tree, s) << "\n";
  });

  // profile
  auto* prof_cmd = app.add_subcommand("profile", "full cost profile as CSV (s_left,s_right,cost)");
  auto prof_opts = std::make_shared<tree_options>();
  prof_opts->attach(prof_cmd);
  auto prof_out = std::make_shared<std::string>();
  prof_cmd->add_option("--out", *prof_out, "output CSV path (default: stdout)");
  prof_cmd->callback([prof_opts, prof_out] {
    const pmq::cost_profile prof = pmq::compute_cost_profile(prof_opts->build_tree());
    if (prof_out->empty()) {
      pmq::write_profile_csv(prof, std::cout);
    } else {
      auto out = open_output(*prof_out);
      pmq::write_profile_csv(prof, out);
    }
  });

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "replicated Monte Carlo cost measurements");
  auto exp_cfg = std::make_shared<pmq::experiment_config>();
  auto exp_kind = std::make_shared<std::string>("quadtree");
  auto exp_csv = std::make_shared<std::string>();
  auto exp_json = std::make_shared<std::string>();
  auto exp_no_profile = std::make_shared<bool>(false);
  exp_cfg->master_seed = kDefaultSeed;
  exp_cmd->add_option("--n", exp_cfg->n_values, "point counts, strictly increasing")->required()->delimiter(',');
  exp_cmd->add_option("--s", exp_cfg->s_values, "fixed query positions")->delimiter(',')->check(CLI::Range(0.0, 1.0));
  exp_cmd->add_flag("--uniform-query", exp_cfg->uniform_query, "also query at a fresh uniform xi per replicate");
  exp_cmd->add_option("--replicates", exp_cfg->replicates, "replicates per n")->capture_default_str();
  exp_cmd->add_option("--seed", exp_cfg->master_seed, "master seed")->capture_default_str();
  exp_cmd->add_option("--kind", *exp_kind, "tree kind")
      ->check(CLI::IsMember({"quadtree", "kd", "relaxed_kd"}))
      ->capture_default_str();
  exp_cmd->add_flag("--poissonized", exp_cfg->poissonized, "draw Poisson(n) points instead of exactly n");
  exp_cmd->add_option("--threads", exp_cfg->threads, "worker threads, 0 = auto")->capture_default_str();
  exp_cmd->add_flag("--no-profile", *exp_no_profile, "skip per-replicate profile integral and worst cost");
  exp_cmd->add_flag("--retain-observations", exp_cfg->retain_observations,
                    "keep raw per-replicate observations in the JSON output");
  exp_cmd->add_option("--max-total-points", exp_cfg->max_total_points, "resource budget on total points drawn");
  exp_cmd->add_option("--csv-out", *exp_csv, "write the summary CSV to a file");
  exp_cmd->add_option("--json-out", *exp_json, "write the full result JSON to a file");
  exp_cmd->callback([exp_cfg, exp_kind, exp_csv, exp_json, exp_no_profile] {
    exp_cfg->kind = pmq::tree_kind_from_string(*exp_kind);
    exp_cfg->record_profile = !*exp_no_profile;
    const pmq::experiment_result result = pmq::run_cost_experiment(*exp_cfg);
    if (!exp_csv->empty()) {
      auto out = open_output(*exp_csv);
      pmq::write_result_csv(result, out);
    }
    if (!exp_json->empty()) open_output(*exp_json) << pmq::result_to_json(result).dump(2) << "\n";
    if (exp_csv->empty() && exp_json->empty()) pmq::write_result_csv(result, std::cout);
  });

  // limit-sim
  auto* lim_cmd = app.add_subcommand("limit-sim", "simulate the limit process and estimate its supremum");
  struct lim_options {
    int depth = 12;
    std::size_t grid = 1024;
    std::size_t replicates = 200;
    std::uint64_t seed = kDefaultSeed;
    int threads = 0;
    std::string path_csv;
    std::string json_out;
  };
  auto lim = std::make_shared<lim_options>();
  lim_cmd->add_option("--depth", lim->depth, "recursion depth of the approximation")->capture_default_str();
  lim_cmd->add_option("--grid", lim->grid, "grid size")->capture_default_str();
  lim_cmd->add_option("--replicates", lim->replicates, "Monte Carlo replicates")->capture_default_str();
  lim_cmd->add_option("--seed", lim->seed, "master seed")->capture_default_str();
  lim_cmd->add_option("--threads", lim->threads, "worker threads, 0 = auto")->capture_default_str();
  lim_cmd->add_option("--path-csv", lim->path_csv, "write one sample path as CSV (s,z)");
  lim_cmd->add_option("--json-out", lim->json_out, "write the summary JSON to a file");
  lim_cmd->callback([lim] {
    if (!lim->path_csv.empty()) {
      pmq::rng_stream rng = pmq::substream(lim->seed, 0, 0xb0);
      const pmq::grid_function path = pmq::simulate_Zn(lim->depth, lim->grid, rng);
      auto out = open_output(lim->path_csv);
      pmq::write_grid_csv(path, out, "z");
    }
    const pmq::sup_estimate est = pmq::estimate_sup(lim->depth, lim->grid, lim->replicates, lim->seed, lim->threads);
    nlohmann::json j;
    j["schema_version"] = 1;
    j["depth"] = est.depth;
    j["grid_size"] = est.grid_size;
    j["replicates"] = est.replicates;
    j["sup_mean"] = est.mean;
    j["sup_variance"] = est.variance;
    j["sup_std_error"] = est.std_error;
    j["note"] = "grid maximum of a finite-depth path lower-bounds the true supremum";
    std::cout << j.dump(2) << "\n";
    if (!lim->json_out.empty()) open_output(lim->json_out) << j.dump(2) << "\n";
  });

  // mu2
  auto* mu2_cmd = app.add_subcommand("mu2", "solve the second-moment integral equation by fixed-point iteration");
  auto mu2_cfg = std::make_shared<pmq::quadrature_config>();
  auto mu2_csv = std::make_shared<std::string>();
  mu2_cfg->tolerance = 1e-10;
  mu2_cmd->add_option("--grid", mu2_cfg->grid_size, "grid size")->capture_default_str();
  mu2_cmd->add_option("--nodes", mu2_cfg->nodes, "Gauss-Legendre nodes per grid cell")->capture_default_str();
  mu2_cmd->add_option("--tol", mu2_cfg->tolerance, "sup-norm stopping tolerance")->capture_default_str();
  mu2_cmd->add_option("--max-iters", mu2_cfg->max_iters, "iteration cap")->capture_default_str();
  mu2_cmd->add_option("--csv-out", *mu2_csv, "write the solution as CSV (s,mu2)");
  mu2_cmd->callback([mu2_cfg, mu2_csv] {
    const pmq::fixed_point_result fp = pmq::solve_fixed_point(*mu2_cfg);
    const double c2 = pmq::constants().c2;
    const pmq::grid_function analytic = pmq::grid_function::sample(
        mu2_cfg->grid_size, [c2](double s) { return c2 * std::pow(s * (1.0 - s), pmq::constants().beta_exp); });
    nlohmann::json j;
    j["schema_version"] = 1;
    j["c2"] = c2;
    j["iterations"] = fp.iterations;
    j["residual"] = fp.residual;
    j["sup_diff_to_analytic"] = fp.solution.max_abs_diff(analytic);
    j["analytic_residual"] = pmq::apply_K(analytic, mu2_cfg->nodes).max_abs_diff(analytic);
    if (!fp.step_ratios.empty()) j["contraction_ratio_last"] = fp.step_ratios.back();
    std::cout << j.dump(2) << "\n";
    if (!mu2_csv->empty()) {
      auto out = open_output(*mu2_csv);
      pmq::write_grid_csv(fp.solution, out, "mu2");
    }
  });

  // report
  auto* rep_cmd = app.add_subcommand("report", "compare a saved experiment result against the theory constants");
  struct rep_options {
    std::string in;
    std::string json_out;
    double sup_mean = -1.0;
    double sup_stderr = 0.0;
  };
  auto rep = std::make_shared<rep_options>();
  rep_cmd->add_option("--in", rep->in, "experiment result JSON written by `experiment --json-out`")->required();
  rep_cmd->add_option("--sup-mean", rep->sup_mean, "E[sup Z] estimate from limit-sim, enables the worst-query row");
  rep_cmd->add_option("--sup-stderr", rep->sup_stderr, "standard error of --sup-mean");
  rep_cmd->add_option("--json-out", rep->json_out, "write the comparison table as JSON");
  rep_cmd->callback([rep] {
    std::ifstream in(rep->in);
    if (!in) throw std::runtime_error("cannot open input file: " + rep->in);
    nlohmann::json j = nlohmann::json::parse(in);
    const pmq::experiment_result result = pmq::result_from_json(j);
    std::optional<pmq::sup_reference> sup;
    if (rep->sup_mean > 0.0) sup = pmq::sup_reference{rep->sup_mean, rep->sup_stderr};
    const pmq::theory_report report = pmq::compare_to_theory(result, sup);
    pmq::print_report(report, std::cout);
    if (!rep->json_out.empty()) open_output(rep->json_out) << pmq::report_to_json(report).dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
