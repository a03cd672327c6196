#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "satuav/bcd.hpp"
#include "satuav/channel.hpp"
#include "satuav/errors.hpp"
#include "satuav/harness.hpp"
#include "satuav/scenario.hpp"
#include "satuav/subproblems.hpp"

namespace {

using namespace satuav;

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  std::vector<std::string> overrides;
  SolveOptions opts;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Scenario load_with_overrides(const CommonArgs& args) {
  Scenario s = load_scenario(args.scenario_path);
  for (const std::string& kv : args.overrides) apply_override(s, kv);
  s.validate();
  return s;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create directory " + dir + ": " +
                             ec.message());
  }
}

void write_history(const Solution& sol, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "outer,objective_bits\n";
  for (size_t j = 0; j < sol.objective_history.size(); ++j) {
    out << j << ',' << num(sol.objective_history[j]) << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed for " + path);
}

void write_cache(const Solution& sol, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "file,eta,rounded\n";
  for (int f = 0; f < sol.rounded_eta.size(); ++f) {
    out << (f + 1) << ',' << num(sol.final.eta.eta[f]) << ','
        << num(sol.rounded_eta[f]) << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed for " + path);
}

const char* status_name(BcdStatus st) {
  switch (st) {
    case BcdStatus::converged: return "converged";
    case BcdStatus::max_outer: return "max-outer";
    default: return "infeasible";
  }
}

void write_summary(const Scenario& scen, const Solution& sol,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "status: " << status_name(sol.status) << '\n'
      << "outer iterations: " << sol.outer_iterations << '\n'
      << "objective (relaxed cache): " << num(sol.objective_bits())
      << " bits\n"
      << "min throughput (rounded cache): "
      << num(sol.per_user_throughput.minCoeff()) << " bits\n"
      << "total throughput (rounded cache): "
      << num(sol.per_user_throughput.sum()) << " bits\n"
      << "cached files:";
  for (int f = 0; f < sol.rounded_eta.size(); ++f) {
    if (sol.rounded_eta[f] == 1.0) out << ' ' << (f + 1);
  }
  out << '\n';
  for (int k = 0; k < sol.per_user_throughput.size(); ++k) {
    out << "user " << scen.users[k].id << " (file "
        << scen.users[k].requested_file
        << "): " << num(sol.per_user_throughput[k]) << " bits\n";
  }
  for (const std::string& e : sol.events) out << "note: " << e << '\n';
  if (!out.flush()) throw std::runtime_error("write failed for " + path);
}

int cmd_solve(const CommonArgs& args) {
  const Scenario scen = load_with_overrides(args);
  ensure_dir(args.out_dir);
  const Solution sol = run_bcd(scen, args.opts);
  write_summary(scen, sol, args.out_dir + "/summary.txt");
  write_history(sol, args.out_dir + "/history.csv");
  write_cache(sol, args.out_dir + "/cache.csv");
  export_trajectory(scen, sol.final.traj, args.out_dir);
  std::cout << "status " << status_name(sol.status) << ", "
            << sol.outer_iterations << " outer iterations, min throughput "
            << num(sol.per_user_throughput.minCoeff()) << " bits\n";
  if (sol.status == BcdStatus::converged) return 0;
  return sol.status == BcdStatus::max_outer ? 2 : 1;
}

int cmd_compare(const CommonArgs& args) {
  const Scenario scen = load_with_overrides(args);
  ensure_dir(args.out_dir);
  std::vector<ResultRow> rows;
  for (const std::string scheme : {"proposed", "bs1", "bs2", "bs3"}) {
    SweepSpec one;
    one.parameter = SweepParameter::slot_count;
    one.values = {static_cast<double>(scen.slot_count)};
    one.schemes = {scheme};
    one.seed = args.seed;
    std::vector<ResultRow> r = run_sweep(one, scen, args.opts);
    rows.push_back(r.front());
  }
  export_csv(rows, args.out_dir + "/compare.csv");
  bool ok = true;
  for (const ResultRow& r : rows) {
    std::cout << r.scheme << ": " << num(r.min_tp_bits) << " bits min, "
              << num(r.total_tp_bits) << " bits total (" << r.status << ")\n";
    ok = ok && r.status.rfind("error", 0) != 0;
  }
  return ok ? 0 : 1;
}

SweepSpec parse_sweep_spec(const std::string& path, std::uint64_t seed_flag,
                           bool seed_given) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sweep spec: " + path);
  SweepSpec spec;
  bool saw_parameter = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    const auto notspace = [](char ch) { return !std::isspace(ch); };
    line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
    line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(),
               line.end());
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(where + ": expected key = value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    std::replace(value.begin(), value.end(), ',', ' ');
    std::istringstream vs(value);
    if (key == "parameter") {
      vs >> value;
      spec.parameter = sweep_parameter_from(value);
      saw_parameter = true;
    } else if (key == "values") {
      double v;
      spec.values.clear();
      while (vs >> v) spec.values.push_back(v);
    } else if (key == "schemes") {
      spec.schemes.clear();
      std::string s;
      while (vs >> s) spec.schemes.push_back(s);
    } else if (key == "seed") {
      if (!(vs >> spec.seed)) throw ParseError(where + ": bad seed");
    } else if (key == "repetitions") {
      if (!(vs >> spec.repetitions)) {
        throw ParseError(where + ": bad repetitions");
      }
    } else {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
  if (!saw_parameter) throw ParseError(path + ": missing 'parameter'");
  if (spec.schemes.empty()) {
    spec.schemes = {"proposed", "bs1", "bs2", "bs3"};
  }
  if (seed_given) spec.seed = seed_flag;
  spec.validate();
  return spec;
}

int cmd_sweep(const CommonArgs& args, const std::string& spec_path, int jobs,
              bool seed_given) {
  const Scenario scen = load_with_overrides(args);
  const SweepSpec spec = parse_sweep_spec(spec_path, args.seed, seed_given);
  ensure_dir(args.out_dir);
  const std::vector<ResultRow> rows = run_sweep(spec, scen, args.opts, jobs);
  export_csv(rows, args.out_dir + "/sweep.csv");
  if (spec.repetitions > 1) {
    export_csv(median_rows(rows), args.out_dir + "/sweep_median.csv");
  }
  int errors = 0;
  for (const ResultRow& r : rows) {
    if (r.status.rfind("error", 0) == 0) ++errors;
  }
  std::cout << rows.size() << " sweep points written to " << args.out_dir
            << "/sweep.csv";
  if (errors > 0) std::cout << " (" << errors << " failed, see status column)";
  std::cout << '\n';
  return 0;
}

int cmd_validate(std::uint64_t seed) {
  int failures = 0;
  auto report = [&](const std::string& name, bool pass,
                    const std::string& detail) {
    std::cout << (pass ? "pass" : "FAIL") << "  " << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << '\n';
    if (!pass) ++failures;
  };

  // Tiny two-user instance shared by the oracle checks.
  Scenario s;
  s.slot_count = 6;
  s.slot_duration_s = 0.5;
  s.area_side_m = 1000.0;
  s.catalog.file_count = 4;
  s.catalog.cache_capacity_files = 2;
  s.catalog.file_size_bits = 40e6;
  s.catalog.zipf_exponent = 0.8;
  s.satellite.tx_power_w = dbm_to_w(65.0);
  s.uav.start = {500.0, 300.0};
  s.uav.end = {500.0, 300.0};
  GroundUser u0;
  u0.id = 0;
  u0.position = {430.0, 340.0};
  u0.requested_file = 2;
  GroundUser u1;
  u1.id = 1;
  u1.position = {590.0, 250.0};
  u1.requested_file = 3;
  s.users = {u0, u1};
  s.validate();

  const RateContext ctx(s);
  Iterate it = initialize(s);

  {
    for (int round = 0; round < 6; ++round) {
      const CacheStep step = solve_cache_placement(s, ctx, it, 1e-8);
      it.eta = step.eta;
    }
    CacheVector rounded;
    rounded.eta = round_cache(it.eta, s.catalog.cache_capacity_files);
    const double algo =
        min_throughput_or_zero(ctx, rounded, it.alloc, it.traj);
    const CacheOracleResult oracle =
        oracle_cache_exhaustive(s, it.alloc, it.traj);
    const double gap = std::abs(algo - oracle.objective_bits) /
                       std::max(1.0, oracle.objective_bits);
    report("cache placement matches exhaustive search", gap <= 0.01,
           "relative gap " + num(gap));
  }

  {
    const ResourceOracleResult oracle =
        oracle_resource_grid(s, it.eta, it.traj);
    const ResourceStep step = solve_resource_allocation(s, ctx, it, 1e-6);
    Iterate cand = it;
    cand.alloc = step.alloc;
    const double algo =
        min_throughput_or_zero(ctx, cand.eta, cand.alloc, cand.traj);
    const double tol = 2.0 / 200.0 * std::max(oracle.objective_bits, algo);
    report("resource split matches grid search",
           std::abs(algo - oracle.objective_bits) <= tol,
           "solver " + num(algo) + " vs grid " + num(oracle.objective_bits));
  }

  {
    bool all_above = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ub(0.05, 1.0), up(0.001, 0.0316),
        ud(100.0, 1500.0);
    for (int trial = 0; trial < 20; ++trial) {
      const double b = ub(rng), p = up(rng), d = ud(rng);
      const MonteCarloRate mc = monte_carlo_rate(s, b, p, d, 100000, rng());
      const double lb =
          b * s.uav.access_bandwidth_hz *
          std::log2(1.0 + ctx.access_psi(p) / std::pow(d, s.radio.alpha));
      const double margin = mc.mean_bits_s + 3.0 * mc.stderr_bits_s - lb;
      worst_margin = std::min(worst_margin, margin);
      all_above = all_above && margin >= 0.0;
    }
    report("closed-form rate stays below the faded mean", all_above,
           "worst margin " + num(worst_margin) + " bits/s");
  }

  {
    const std::string tmp =
        (std::filesystem::temp_directory_path() / "satuav_roundtrip.cfg")
            .string();
    save_scenario(s, tmp);
    const Scenario back = load_scenario(tmp);
    const bool same = back.slot_count == s.slot_count &&
                      back.user_count() == s.user_count() &&
                      std::abs(back.uav.p_max_w - s.uav.p_max_w) <=
                          1e-12 * s.uav.p_max_w;
    report("scenario file round-trip", same, tmp);
  }

  std::cout << (failures == 0 ? "all checks passed\n"
                              : std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"satellite- and cache-assisted fair content delivery planner"};
  app.require_subcommand(1);

  CommonArgs args;
  int jobs = 1;
  std::string spec_path;

  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario) {
      cmd->add_option("--scenario", args.scenario_path, "scenario config file")
          ->required();
      cmd->add_option("--set", args.overrides,
                      "override section.key=value after parsing");
    }
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "seed for randomized steps");
    cmd->add_option("--eps", args.opts.eps_outer,
                    "outer-loop relative improvement threshold");
    cmd->add_option("--max-outer", args.opts.max_outer,
                    "outer iteration budget");
    cmd->add_option("--solver-tol", args.opts.solver_tol,
                    "inner solver tolerance");
    cmd->add_option("--kappa0", args.opts.kappa0, "initial binarity penalty");
    cmd->add_option("--kappa-growth", args.opts.kappa_growth,
                    "binarity penalty growth per outer iteration");
    cmd->add_option("--kappa-cap", args.opts.kappa_cap,
                    "binarity penalty ceiling");
    cmd->add_option("--binarity-tol", args.opts.binarity_tol,
                    "rounding tolerance for the cache vector");
  };

  CLI::App* solve = app.add_subcommand("solve", "run the full optimizer");
  add_common(solve, true);
  CLI::App* compare =
      app.add_subcommand("compare", "run the optimizer and all baselines");
  add_common(compare, true);
  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep, true);
  sweep->add_option("--spec", spec_path, "sweep spec file")->required();
  sweep->add_option("--jobs", jobs, "parallel sweep points");
  CLI::App* validate =
      app.add_subcommand("validate", "run built-in cross-checks");
  validate->add_option("--seed", args.seed, "seed for the Monte-Carlo checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return cmd_solve(args);
    if (compare->parsed()) return cmd_compare(args);
    if (sweep->parsed()) {
      return cmd_sweep(args, spec_path, jobs, sweep->count("--seed") > 0);
    }
    return cmd_validate(args.seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
