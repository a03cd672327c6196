#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "satuav/bcd.hpp"
#include "satuav/channel.hpp"
#include "satuav/errors.hpp"

using namespace satuav;

namespace {

Scenario base_scenario(int slots, int files, int cache) {
  Scenario s;
  s.slot_count = slots;
  s.slot_duration_s = 0.5;
  s.area_side_m = 1000.0;
  s.catalog.file_count = files;
  s.catalog.cache_capacity_files = cache;
  s.catalog.file_size_bits = 40e6;
  s.catalog.zipf_exponent = 0.8;
  s.satellite.tx_power_w = dbm_to_w(65.0);
  s.uav.start = {500.0, 300.0};
  s.uav.end = {500.0, 300.0};
  return s;
}

void add_user(Scenario& s, double x, double y, int file) {
  GroundUser u;
  u.id = static_cast<int>(s.users.size());
  u.position = {x, y};
  u.requested_file = file;
  s.users.push_back(u);
}

CacheVector as_cache(std::initializer_list<double> vals) {
  CacheVector c;
  c.eta = Eigen::VectorXd(static_cast<int>(vals.size()));
  int i = 0;
  for (double v : vals) c.eta[i++] = v;
  return c;
}

void expect_monotone(const Solution& sol) {
  for (size_t j = 0; j + 1 < sol.objective_history.size(); ++j) {
    CHECK(sol.objective_history[j + 1] >= sol.objective_history[j] - 1e-9);
  }
}

double crude_upper_bound(const Scenario& s) {
  const double snr = s.uav.p_max_w * s.radio.beta0 /
                     (std::pow(s.uav.altitude_m, s.radio.alpha) * s.access_noise_w());
  return s.slot_duration_s * s.slot_count * s.uav.access_bandwidth_hz *
         std::log2(1.0 + snr);
}

}  // namespace

TEST_CASE("initial iterate splits resources evenly and caches popular requests") {
  Scenario s = base_scenario(8, 6, 2);
  add_user(s, 400.0, 300.0, 5);
  add_user(s, 600.0, 300.0, 2);
  add_user(s, 500.0, 400.0, 4);
  add_user(s, 500.0, 200.0, 2);
  s.uav.start = {440.0, 300.0};
  s.uav.end = {560.0, 300.0};
  s.validate();

  const Iterate it = initialize(s);
  const double step = s.uav.v_max_mps * s.slot_duration_s;
  for (int n = 1; n <= s.slot_count; ++n) {
    CHECK((it.traj.pos(n) - it.traj.pos(n - 1)).norm() <= step + 1e-9);
  }
  CHECK(it.traj.pos(0) == s.uav.start);
  CHECK(it.traj.pos(s.slot_count) == s.uav.end);
  for (int n = 0; n < s.slot_count; ++n) {
    CHECK(it.alloc.b.row(n).sum() == 1.0);  // 4 * 0.25 is exact
    CHECK(it.alloc.p.row(n).sum() ==
          doctest::Approx(s.uav.p_max_w).epsilon(1e-15));
  }
  // Three distinct requested files {2,4,5}, capacity two: the two most
  // popular (lowest indices) are cached.
  CHECK(it.eta.eta.sum() == 2.0);
  CHECK(it.eta.eta[1] == 1.0);
  CHECK(it.eta.eta[3] == 1.0);
  CHECK(it.chi >= 0.0);

  Scenario bad = s;
  bad.uav.end = {440.0 + 1e5, 300.0};
  CHECK_THROWS_AS(initialize(bad), InfeasibleError);
}

TEST_CASE("cache rounding follows the tolerance and top-capacity rules") {
  bool fb = false;
  Eigen::VectorXd r = round_cache(as_cache({0.999, 0.001, 0.998}), 2, 1e-3, &fb);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 1.0);

  r = round_cache(as_cache({0.6, 0.6, 0.3}), 2, 1e-3, &fb);
  CHECK(fb);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 1.0);
  CHECK(r[2] == 0.0);

  r = round_cache(as_cache({0.5, 0.5}), 1, 1e-3, &fb);
  CHECK(fb);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 0.0);

  r = round_cache(as_cache({0.0, 1.0, 0.0005}), 2, 1e-3, &fb);
  CHECK_FALSE(fb);
  CHECK(r.sum() == 1.0);
}

TEST_CASE("single-user single-file run converges fast and caches the file") {
  Scenario s = base_scenario(4, 1, 1);  // capacity == catalog, deliberately degenerate
  s.uav.start = {500.0, 500.0};
  s.uav.end = {500.0, 500.0};
  add_user(s, 460.0, 500.0, 1);

  const Solution sol = run_bcd(s);
  CHECK(sol.status == BcdStatus::converged);
  CHECK(sol.outer_iterations <= 5);
  REQUIRE(sol.rounded_eta.size() == 1);
  CHECK(sol.rounded_eta[0] == 1.0);
  CHECK(sol.objective_bits() > 0.0);
  expect_monotone(sol);

  // With one user the full bandwidth and power should be claimed.
  for (int n = 0; n < s.slot_count; ++n) {
    CHECK(sol.final.alloc.b(n, 0) >= 0.999);
    CHECK(sol.final.alloc.p(n, 0) >= 0.999 * s.uav.p_max_w);
  }
}

TEST_CASE("runs are deterministic") {
  Scenario s = base_scenario(6, 4, 2);
  add_user(s, 420.0, 350.0, 1);
  add_user(s, 590.0, 260.0, 3);
  s.validate();

  const Solution a = run_bcd(s);
  const Solution b = run_bcd(s);
  REQUIRE(a.objective_history.size() == b.objective_history.size());
  for (size_t j = 0; j < a.objective_history.size(); ++j) {
    CHECK(a.objective_history[j] == b.objective_history[j]);
  }
  CHECK(a.rounded_eta == b.rounded_eta);
  CHECK(a.final.alloc.b == b.final.alloc.b);
  CHECK(a.final.alloc.p == b.final.alloc.p);
  CHECK(a.final.traj.q == b.final.traj.q);
  CHECK(a.outer_iterations == b.outer_iterations);
}

TEST_CASE("objective stays within the single-link capacity bound") {
  Scenario s = base_scenario(6, 4, 2);
  add_user(s, 430.0, 340.0, 1);
  add_user(s, 580.0, 270.0, 2);
  s.validate();

  const Solution sol = run_bcd(s);
  expect_monotone(sol);
  const double cap = crude_upper_bound(s);
  for (double v : sol.objective_history) CHECK(v <= cap);
  CHECK(sol.per_user_throughput.minCoeff() >= 0.0);
  CHECK(sol.rounded_eta.sum() <= s.catalog.cache_capacity_files + 1e-12);
}

TEST_CASE("restricted schemes never beat the full optimizer") {
  Scenario s = base_scenario(8, 3, 2);
  s.uav.start = {420.0, 300.0};
  s.uav.end = {580.0, 300.0};
  add_user(s, 400.0, 420.0, 1);
  add_user(s, 620.0, 200.0, 2);
  s.validate();

  const Solution full = run_bcd(s);
  const Solution fixed_path = run_bs1(s);
  const Solution no_cache = run_bs2(s);
  const Solution uniform_resources = run_bs3(s);

  expect_monotone(full);
  expect_monotone(fixed_path);
  expect_monotone(no_cache);
  expect_monotone(uniform_resources);

  const double slack = 1e-9 * (1.0 + full.objective_bits());
  CHECK(full.objective_bits() >= fixed_path.objective_bits() - slack);
  CHECK(full.objective_bits() >= no_cache.objective_bits() - slack);
  CHECK(full.objective_bits() >= uniform_resources.objective_bits() - slack);

  // The no-cache scheme really kept the cache empty.
  CHECK(no_cache.rounded_eta.isZero(0.0));
  CHECK(no_cache.final.eta.eta.isZero(0.0));
  // The uniform-resource scheme really kept the even split.
  CHECK(uniform_resources.final.alloc.b.isApproxToConstant(0.5, 1e-15));
}

TEST_CASE("uniform-resource scheme matches the optimizer for a lone user") {
  Scenario s = base_scenario(5, 2, 1);
  add_user(s, 540.0, 330.0, 1);
  s.validate();

  const Solution full = run_bcd(s);
  const Solution bs3 = run_bs3(s);
  // With K=1 the frozen uniform split is the full-resource optimum, so the
  // two schemes coincide.
  CHECK(bs3.objective_bits() ==
        doctest::Approx(full.objective_bits()).epsilon(1e-4));
}

TEST_CASE("near-tied cache shares surface through the fallback flag") {
  Scenario s = base_scenario(8, 4, 3);
  add_user(s, 420.0, 320.0, 1);
  add_user(s, 580.0, 280.0, 2);
  s.validate();

  const Solution sol = run_bcd(s);
  expect_monotone(sol);
  // Whatever the fractional fixed point looked like, both requested files
  // must survive the rounding with room to spare at this capacity.
  CHECK(sol.rounded_eta[0] == 1.0);
  CHECK(sol.rounded_eta[1] == 1.0);
  CHECK(sol.rounded_eta.sum() <= 3.0 + 1e-12);
  CHECK(sol.per_user_throughput.minCoeff() > 0.0);
}
