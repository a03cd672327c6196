// Acceptance gate: ten checks covering the physical constants, the bound
// and surrogate directions, solver convergence and oracle agreement, the
// baseline ordering and the headline parameter trends. Prints one line per
// criterion and exits nonzero if any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "satuav/bcd.hpp"
#include "satuav/channel.hpp"
#include "satuav/harness.hpp"
#include "satuav/scenario.hpp"
#include "satuav/subproblems.hpp"

using namespace satuav;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d  %s  %s\n", criterion, pass ? "pass" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* pattern, double a, double b = 0.0,
                double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

int zipf_draw(std::mt19937_64& rng, int file_count, double rho) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double z = 0.0;
  for (int f = 1; f <= file_count; ++f) z += std::pow(f, -rho);
  double target = u01(rng) * z, cum = 0.0;
  for (int f = 1; f <= file_count; ++f) {
    cum += std::pow(f, -rho);
    if (cum >= target) return f;
  }
  return file_count;
}

// K=4, N=40, F=10, S=3 instance with seeded user placement; the satellite
// transmitter is set high enough that every file is deliverable in-mission.
Scenario medium_scenario(std::uint64_t seed) {
  Scenario s;
  s.slot_count = 40;
  s.catalog.file_count = 10;
  s.catalog.cache_capacity_files = 3;
  s.satellite.tx_power_w = dbm_to_w(65.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  s.users.resize(4);
  for (int k = 0; k < 4; ++k) {
    s.users[k].id = k;
    s.users[k].position = {u01(rng) * s.area_side_m, u01(rng) * s.area_side_m};
    s.users[k].requested_file =
        zipf_draw(rng, s.catalog.file_count, s.catalog.zipf_exponent);
  }
  s.validate();
  return s;
}

// K=2, N=6, F=4, S=2 hovering instance for the oracle cross-checks.
Scenario tiny_scenario(std::uint64_t seed) {
  Scenario s;
  s.slot_count = 6;
  s.catalog.file_count = 4;
  s.catalog.cache_capacity_files = 2;
  s.satellite.tx_power_w = dbm_to_w(65.0);
  s.uav.start = {500.0, 300.0};
  s.uav.end = {500.0, 300.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  s.users.resize(2);
  for (int k = 0; k < 2; ++k) {
    s.users[k].id = k;
    s.users[k].position = {u01(rng) * s.area_side_m, u01(rng) * s.area_side_m};
    s.users[k].requested_file =
        zipf_draw(rng, s.catalog.file_count, s.catalog.zipf_exponent);
  }
  s.validate();
  return s;
}

void criterion_1() {
  const double v = orbital_velocity(2000e3);
  report(1, std::abs(v - 6900.5) <= 0.5,
         fmt("orbital velocity at 2000 km altitude: %.2f m/s (target 6900.5 "
             "+/- 0.5)",
             v));
}

void criterion_2() {
  const double w = noise_power_w(20e6);
  const double dbm = w_to_dbm(w);
  report(2, std::abs(dbm - (-101.0)) <= 0.05,
         fmt("thermal noise over 20 MHz: %.3f dBm (target -101 +/- 0.05)",
             dbm));
}

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_anchor = 0.0;
  double worst_excess = -1.0;  // surrogate minus exact; must stay <= 0

  const double kappa = 2.5;
  for (int i = 0; i <= 99; ++i) {
    const double e0 = i / 99.0;
    const double exact0 = kappa * e0 * (e0 - 1.0);
    const double rel0 = std::abs(penalty_surrogate(e0, e0, kappa) - exact0) /
                        std::max(1.0, std::abs(exact0));
    worst_anchor = std::max(worst_anchor, rel0);
    for (int j = 0; j <= 99; ++j) {
      const double e = j / 99.0;
      const double exact = kappa * e * (e - 1.0);
      worst_excess =
          std::max(worst_excess, penalty_surrogate(e, e0, kappa) - exact);
    }
  }

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ub(0.01, 1.0), uphi(0.01, 20.0);
  for (int i = 0; i < 10000; ++i) {
    const double b0 = ub(rng), phi0 = uphi(rng);
    const double exact0 = b0 * phi0;
    const double rel0 = std::abs(theta_surrogate(b0, phi0, b0, phi0) - exact0) /
                        std::max(1.0, exact0);
    worst_anchor = std::max(worst_anchor, rel0);
    const double b = ub(rng), phi = uphi(rng);
    worst_excess =
        std::max(worst_excess, theta_surrogate(b, phi, b0, phi0) - b * phi);
  }

  std::uniform_real_distribution<double> unu(1e4, 5e6), upsi(0.0, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double nu0 = unu(rng), psi = upsi(rng);
    const double exact0 = std::log2(1.0 + psi / nu0);
    const double rel0 = std::abs(log_recip_lb(nu0, nu0, psi) - exact0) /
                        std::max(1.0, exact0);
    worst_anchor = std::max(worst_anchor, rel0);
    const double nu = unu(rng);
    worst_excess = std::max(
        worst_excess, log_recip_lb(nu, nu0, psi) - std::log2(1.0 + psi / nu));
  }

  const double wall = seconds_since(t0);
  report(3,
         worst_anchor <= 1e-12 && worst_excess <= 1e-12 && wall < 1.0,
         fmt("surrogate anchors off by %.2e rel, max overshoot %.2e, "
             "%.2f s",
             worst_anchor, worst_excess, wall));
}

void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  Scenario s;  // default radio parameters
  GroundUser u;
  s.users = {u};
  const RateContext ctx(s);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ub(0.05, 1.0), up(1e-3, 0.0316),
      ud(100.0, 1500.0);
  int held = 0;
  double worst_margin = 1e300;
  for (int trial = 0; trial < 200; ++trial) {
    const double b = ub(rng), p = up(rng), d = ud(rng);
    const MonteCarloRate mc = monte_carlo_rate(s, b, p, d, 100000, rng());
    const double lb =
        b * s.uav.access_bandwidth_hz *
        std::log2(1.0 + ctx.access_psi(p) / std::pow(d, s.radio.alpha));
    const double margin = mc.mean_bits_s - (lb - 3.0 * mc.stderr_bits_s);
    if (margin >= 0.0) ++held;
    worst_margin = std::min(worst_margin, margin);
  }
  const double wall = seconds_since(t0);
  report(4, held == 200 && wall < 30.0,
         fmt("rate bound held on %.0f/200 draws, worst margin %.1f bit/s, "
             "%.1f s",
             held, worst_margin, wall));
}

struct MediumRun {
  std::vector<Solution> proposed;
  std::vector<Scenario> scenarios;
  double wall_s = 0.0;
};

MediumRun criterion_5(int count) {
  MediumRun run;
  const auto t0 = std::chrono::steady_clock::now();
  bool monotone = true, terminated = true;
  double worst_dip = 0.0;
  for (int i = 0; i < count; ++i) {
    run.scenarios.push_back(medium_scenario(100 + i));
    run.proposed.push_back(run_bcd(run.scenarios.back()));
    const Solution& sol = run.proposed.back();
    terminated = terminated && sol.outer_iterations <= 100;
    for (size_t j = 0; j + 1 < sol.objective_history.size(); ++j) {
      const double dip =
          sol.objective_history[j] - sol.objective_history[j + 1];
      worst_dip = std::max(worst_dip, dip);
      monotone = monotone && dip <= 1e-9;
    }
  }
  run.wall_s = seconds_since(t0);
  report(5, monotone && terminated && run.wall_s < 600.0,
         fmt("20 solver runs monotone (worst dip %.1e bits), all within "
             "budget, %.0f s",
             worst_dip, run.wall_s));
  return run;
}

void criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  int agreed = 0;
  double worst_gap = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Scenario s = tiny_scenario(200 + i);
    const RateContext ctx(s);
    Iterate it = initialize(s);
    for (int round = 0; round < 6; ++round) {
      const CacheStep step = solve_cache_placement(s, ctx, it, 1e-8);
      it.eta = step.eta;
    }
    CacheVector rounded;
    rounded.eta = round_cache(it.eta, s.catalog.cache_capacity_files);
    const double algo = min_throughput_or_zero(ctx, rounded, it.alloc, it.traj);
    const CacheOracleResult oracle =
        oracle_cache_exhaustive(s, it.alloc, it.traj);
    const double gap = (oracle.objective_bits - algo) /
                       std::max(1.0, oracle.objective_bits);
    worst_gap = std::max(worst_gap, gap);
    if (gap <= 0.01 && algo <= oracle.objective_bits * (1.0 + 1e-9)) ++agreed;
  }
  const double wall = seconds_since(t0);
  report(6, agreed == 20 && wall < 120.0,
         fmt("cache block matched the exhaustive oracle on %.0f/20 "
             "instances, worst gap %.2e rel, %.1f s",
             agreed, worst_gap, wall));
}

void criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();
  bool all_close = true;
  double worst_rel = 0.0;
  for (int i = 0; i < 3; ++i) {
    Scenario s = tiny_scenario(300 + i);
    if (i == 0) s.users.resize(1);  // K=1 slice
    s.validate();
    const RateContext ctx(s);
    const Iterate it = initialize(s);
    const ResourceOracleResult oracle =
        oracle_resource_grid(s, it.eta, it.traj, 200);
    const ResourceStep step = solve_resource_allocation(s, ctx, it, 1e-6);
    const double algo =
        min_throughput_or_zero(ctx, it.eta, step.alloc, it.traj);
    const double rel = std::abs(algo - oracle.objective_bits) /
                       std::max(1.0, std::max(algo, oracle.objective_bits));
    worst_rel = std::max(worst_rel, rel);
    all_close = all_close && rel <= 2.0 / 200.0;
  }
  const double wall = seconds_since(t0);
  report(7, all_close && wall < 120.0,
         fmt("resource block within %.2e rel of the grid oracle "
             "(allowed 1e-2), %.1f s",
             worst_rel, wall));
}

void criterion_8(const MediumRun& run) {
  int dominated = 0;
  double worst_shortfall = 0.0;
  for (size_t i = 0; i < run.scenarios.size(); ++i) {
    const double ours = run.proposed[i].per_user_throughput.minCoeff();
    double best_baseline = 0.0;
    for (auto* scheme : {run_bs1, run_bs2, run_bs3}) {
      const Solution b = scheme(run.scenarios[i], {});
      best_baseline =
          std::max(best_baseline, b.per_user_throughput.minCoeff());
    }
    const double shortfall = best_baseline - ours;
    worst_shortfall = std::max(worst_shortfall, shortfall);
    if (shortfall <= 1e-6 * std::max(1.0, best_baseline)) ++dominated;
  }
  report(8, dominated == static_cast<int>(run.scenarios.size()),
         fmt("proposed scheme at or above every baseline on %.0f/20 "
             "scenarios (worst shortfall %.1f bits)",
             dominated, worst_shortfall));
}

void criterion_9() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario base = medium_scenario(900);

  SweepSpec slots;
  slots.parameter = SweepParameter::slot_count;
  slots.values = {40.0, 80.0, 120.0, 160.0};
  slots.schemes = {"proposed"};
  const std::vector<ResultRow> srows = run_sweep(slots, base);
  bool slots_up = true;
  for (size_t i = 0; i + 1 < srows.size(); ++i) {
    slots_up = slots_up && srows[i + 1].min_tp_bits >= srows[i].min_tp_bits &&
               srows[i].status == "converged";
  }

  SweepSpec cache;
  cache.parameter = SweepParameter::cache_size;
  cache.values = {2.0, 5.0, 8.0};
  cache.schemes = {"bs2"};
  const std::vector<ResultRow> crows = run_sweep(cache, base);
  bool cache_flat = true;
  for (const ResultRow& r : crows) {
    cache_flat = cache_flat && r.min_tp_bits == crows[0].min_tp_bits;
  }

  SweepSpec power;
  power.parameter = SweepParameter::p_max_dbm;
  power.values = {5.0, 15.0, 25.0, 40.0};
  power.schemes = {"proposed"};
  const std::vector<ResultRow> prows = run_sweep(power, base);
  bool power_up = true;
  for (size_t i = 0; i + 1 < prows.size(); ++i) {
    power_up = power_up && prows[i + 1].min_tp_bits >= prows[i].min_tp_bits;
  }

  const double wall = seconds_since(t0);
  std::string detail = "slot trend ";
  detail += slots_up ? "up" : "BROKEN";
  detail += ", cache-free baseline ";
  detail += cache_flat ? "flat" : "NOT FLAT";
  detail += ", power trend ";
  detail += power_up ? "up" : "BROKEN";
  detail += fmt(", %.0f s", wall);
  report(9, slots_up && cache_flat && power_up && wall < 900.0, detail);
}

void criterion_10(const MediumRun& run) {
  int binary = 0;
  double worst = 0.0;
  for (const Solution& sol : run.proposed) {
    double dev = 0.0;
    for (int f = 0; f < sol.final.eta.eta.size(); ++f) {
      const double e = sol.final.eta.eta[f];
      dev = std::max(dev, std::min(e, 1.0 - e));
    }
    worst = std::max(worst, dev);
    if (dev <= 1e-3) ++binary;
  }
  const int need = static_cast<int>(run.proposed.size()) * 9 / 10;
  report(10, binary >= need,
         fmt("penalty drove the cache vector binary on %.0f/20 runs "
             "(worst deviation %.2e, need >= %.0f)",
             binary, worst, need));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  const MediumRun run = criterion_5(20);
  criterion_6();
  criterion_7();
  criterion_8(run);
  criterion_9();
  criterion_10(run);
  std::printf("%s\n", failures == 0 ? "acceptance: all criteria pass"
                                    : "acceptance: FAILURES present");
  return failures == 0 ? 0 : 1;
}
