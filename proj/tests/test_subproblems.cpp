#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "satuav/channel.hpp"
#include "satuav/subproblems.hpp"

using namespace satuav;

namespace {

// Strong satellite link so non-cached files arrive within a few slots.
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

Trajectory straight_line(const Scenario& s) {
  Trajectory t;
  t.q.resize(s.slot_count + 1, 2);
  for (int n = 0; n <= s.slot_count; ++n) {
    const double a = static_cast<double>(n) / s.slot_count;
    t.q.row(n) = ((1.0 - a) * s.uav.start + a * s.uav.end).transpose();
  }
  return t;
}

Iterate make_iterate(const Scenario& s, const Eigen::VectorXd& eta) {
  Iterate it;
  it.eta.eta = eta;
  const int K = s.user_count();
  it.alloc.b = Eigen::MatrixXd::Constant(s.slot_count, K, 1.0 / K);
  it.alloc.p = Eigen::MatrixXd::Constant(s.slot_count, K, s.uav.p_max_w / K);
  it.traj = straight_line(s);
  it.kappa = 0.1;
  return it;
}

Eigen::VectorXd unit_eta(int files, std::initializer_list<int> cached) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(files);
  for (int f : cached) eta[f - 1] = 1.0;
  return eta;
}

void expect_eta_feasible(const Scenario& s, const CacheVector& eta) {
  REQUIRE(eta.eta.size() == s.catalog.file_count);
  for (int f = 0; f < eta.eta.size(); ++f) {
    CHECK(eta.eta[f] >= -1e-9);
    CHECK(eta.eta[f] <= 1.0 + 1e-9);
  }
  CHECK(eta.eta.sum() <= s.catalog.cache_capacity_files + 1e-6);
}

void expect_alloc_feasible(const Scenario& s, const Allocation& a) {
  const double P = s.uav.p_max_w;
  REQUIRE(a.b.rows() == s.slot_count);
  REQUIRE(a.b.cols() == s.user_count());
  for (int n = 0; n < s.slot_count; ++n) {
    CHECK(a.b.row(n).sum() <= 1.0 + 1e-8);
    CHECK(a.p.row(n).sum() <= P + 1e-8 * (1.0 + P));
    for (int k = 0; k < s.user_count(); ++k) {
      CHECK(a.b(n, k) >= -1e-12);
      CHECK(a.b(n, k) <= 1.0 + 1e-12);
      CHECK(a.p(n, k) >= -1e-12);
    }
  }
}

void expect_traj_feasible(const Scenario& s, const Trajectory& t, double tol_m) {
  REQUIRE(t.q.rows() == s.slot_count + 1);
  CHECK((t.pos(0) - s.uav.start).norm() == 0.0);
  CHECK((t.pos(s.slot_count) - s.uav.end).norm() == 0.0);
  const double step = s.uav.v_max_mps * s.slot_duration_s;
  for (int n = 1; n <= s.slot_count; ++n) {
    CHECK((t.pos(n) - t.pos(n - 1)).norm() <= step + tol_m);
  }
}

// Exhaustive oracle over every binary placement of exactly S files.
double best_binary_placement(const Scenario& s, const RateContext& ctx,
                             const Iterate& it) {
  const int F = s.catalog.file_count;
  const int S = s.catalog.cache_capacity_files;
  std::vector<char> mask(F, 0);
  std::fill(mask.begin(), mask.begin() + S, 1);
  std::sort(mask.begin(), mask.end());
  double best = -std::numeric_limits<double>::infinity();
  do {
    CacheVector eta;
    eta.eta = Eigen::VectorXd::Zero(F);
    for (int f = 0; f < F; ++f) eta.eta[f] = mask[f] ? 1.0 : 0.0;
    best = std::max(best, min_throughput_or_zero(ctx, eta, it.alloc, it.traj));
  } while (std::next_permutation(mask.begin(), mask.end()));
  return best;
}

Eigen::VectorXd round_top_s(const Eigen::VectorXd& eta, int S) {
  std::vector<int> order(eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return eta[a] > eta[b]; });
  Eigen::VectorXd out = Eigen::VectorXd::Zero(eta.size());
  for (int i = 0; i < S && i < static_cast<int>(order.size()); ++i) {
    out[order[i]] = 1.0;
  }
  return out;
}

}  // namespace

TEST_CASE("cache penalty linearization anchors") {
  // Expansion at the stationary midpoint kills the slope for every eta.
  for (double eta : {0.0, 0.25, 0.5, 1.0}) {
    CHECK(penalty_surrogate(eta, 0.5, 2.0) == doctest::Approx(-0.5).epsilon(1e-15));
  }
  CHECK(penalty_surrogate(1.0, 1.0, 3.0) == doctest::Approx(0.0).scale(1.0));
  // Tight at the expansion point: equals kappa * eta * (eta - 1).
  for (double e0 : {0.0, 0.1, 0.37, 0.5, 0.92, 1.0}) {
    const double exact = 0.7 * e0 * (e0 - 1.0);
    CHECK(penalty_surrogate(e0, e0, 0.7) ==
          doctest::Approx(exact).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("cache penalty linearization is a global lower bound") {
  const double kappa = 1.3;
  for (int i = 0; i <= 100; ++i) {
    const double e0 = i / 100.0;
    for (int j = 0; j <= 100; ++j) {
      const double eta = j / 100.0;
      const double exact = kappa * eta * (eta - 1.0);
      REQUIRE(penalty_surrogate(eta, e0, kappa) <= exact + 1e-12);
    }
  }
}

TEST_CASE("bandwidth-rate product surrogate anchors") {
  for (double b0 : {0.0, 0.3, 1.0}) {
    for (double p0 : {0.0, 1.7, 14.2}) {
      CHECK(theta_surrogate(b0, p0, b0, p0) ==
            doctest::Approx(b0 * p0).epsilon(1e-12).scale(1.0));
    }
  }
  // Degenerate expansion collapses to the pure concave part.
  CHECK(theta_surrogate(0.8, 0.1, 0.0, 0.0) ==
        doctest::Approx(-0.25 * 0.7 * 0.7).epsilon(1e-13));
}

TEST_CASE("bandwidth-rate product surrogate lower-bounds the product") {
  const double b0 = 0.4, p0 = 6.0;
  for (int i = 0; i <= 100; ++i) {
    const double b = i / 100.0;
    for (int j = 0; j <= 2000; ++j) {
      const double phi = j / 100.0;
      REQUIRE(theta_surrogate(b, phi, b0, p0) <= b * phi + 1e-10);
    }
  }
}

TEST_CASE("reciprocal-log tangent bound") {
  const double psi = 3.7e5, nu0 = 1.2e6;
  CHECK(log_recip_lb(nu0, nu0, psi) ==
        doctest::Approx(std::log2(1.0 + psi / nu0)).epsilon(1e-12));
  CHECK(log_recip_lb(2.0, 0.5, 0.0) == doctest::Approx(0.0).scale(1.0));
  for (int i = 0; i < 1000; ++i) {
    const double nu = nu0 * (0.1 + 9.9 * i / 999.0);
    const double exact = std::log2(1.0 + psi / nu);
    REQUIRE(log_recip_lb(nu, nu0, psi) <= exact + 1e-12);
  }
  CHECK_THROWS_AS(log_recip_lb(0.0, 1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_recip_lb(1.0, -2.0, 1.0), std::domain_error);
}

TEST_CASE("cache placement with zero capacity returns the empty cache") {
  Scenario s = base_scenario(6, 3, 0);
  s.uav.start = {470.0, 300.0};
  s.uav.end = {530.0, 300.0};
  add_user(s, 450.0, 350.0, 1);
  add_user(s, 550.0, 250.0, 2);
  s.validate();
  const RateContext ctx(s);
  const Iterate it = make_iterate(s, unit_eta(3, {1}));

  const CacheStep step = solve_cache_placement(s, ctx, it, 1e-6);
  CHECK(step.eta.eta.isZero(0.0));
  CHECK(step.status == conic::SolveStatus::optimal);
  CHECK(step.chi == doctest::Approx(min_throughput_or_zero(
                        ctx, step.eta, it.alloc, it.traj))
                        .epsilon(1e-9));
}

TEST_CASE("ample cache capacity ends up caching every requested file") {
  Scenario s = base_scenario(8, 4, 3);
  add_user(s, 420.0, 320.0, 1);
  add_user(s, 580.0, 280.0, 2);
  s.validate();
  const RateContext ctx(s);

  // Start from an empty cache and iterate to a fixed point. The bottleneck
  // user's file is fully cached outright; the other requested file keeps at
  // least the share that equalizes the two users, so the rounded placement
  // covers every request and matches the best binary placement exactly.
  Iterate it = make_iterate(s, Eigen::VectorXd::Zero(4));
  CacheStep step;
  for (int round = 0; round < 6; ++round) {
    step = solve_cache_placement(s, ctx, it, 1e-8);
    REQUIRE(step.status == conic::SolveStatus::optimal);
    it.eta = step.eta;
  }
  CHECK(step.eta.eta.head(2).maxCoeff() >= 0.99);
  CHECK(step.eta.eta[0] > 1e-3);
  CHECK(step.eta.eta[1] > 1e-3);
  expect_eta_feasible(s, step.eta);

  CacheVector rounded;
  rounded.eta = round_top_s(step.eta.eta, s.catalog.cache_capacity_files);
  CHECK(rounded.eta[0] == 1.0);
  CHECK(rounded.eta[1] == 1.0);
  CHECK(min_throughput_or_zero(ctx, rounded, it.alloc, it.traj) ==
        doctest::Approx(best_binary_placement(s, ctx, it)).epsilon(1e-9));

  // The frozen-model objective never overstates delivered throughput.
  const double truth = min_throughput_or_zero(ctx, step.eta, it.alloc, it.traj);
  CHECK(step.chi <= truth + 1e-6 * (1.0 + truth));
}

TEST_CASE("cache placement fixed point matches the exhaustive binary oracle") {
  Scenario s = base_scenario(8, 4, 2);
  add_user(s, 430.0, 330.0, 2);
  add_user(s, 570.0, 270.0, 3);
  s.validate();
  const RateContext ctx(s);

  const double oracle =
      best_binary_placement(s, ctx, make_iterate(s, Eigen::VectorXd::Zero(4)));

  auto run_from = [&](const Eigen::VectorXd& eta0) {
    Iterate it = make_iterate(s, eta0);
    for (int round = 0; round < 10; ++round) {
      const CacheStep step = solve_cache_placement(s, ctx, it, 1e-8);
      REQUIRE(step.status == conic::SolveStatus::optimal);
      if ((step.eta.eta - it.eta.eta).lpNorm<Eigen::Infinity>() < 1e-9) {
        it.eta = step.eta;
        break;
      }
      it.eta = step.eta;
    }
    CacheVector rounded;
    rounded.eta = round_top_s(it.eta.eta, s.catalog.cache_capacity_files);
    return min_throughput_or_zero(ctx, rounded, it.alloc, it.traj);
  };

  // From the natural start (most popular requested files cached).
  CHECK(run_from(unit_eta(4, {2, 3})) ==
        doctest::Approx(oracle).epsilon(1e-9));
  // From a deliberately bad start caching the two unrequested files.
  CHECK(run_from(unit_eta(4, {1, 4})) ==
        doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("resource split for a single user saturates bandwidth and power") {
  Scenario s = base_scenario(6, 2, 1);
  add_user(s, 480.0, 300.0, 1);
  s.validate();
  const RateContext ctx(s);

  Iterate it = make_iterate(s, unit_eta(2, {1}));
  it.alloc.b.setConstant(0.5);
  it.alloc.p.setConstant(0.5 * s.uav.p_max_w);

  ResourceStep step;
  for (int round = 0; round < 12; ++round) {
    step = solve_resource_allocation(s, ctx, it, 1e-8);
    REQUIRE(step.status == conic::SolveStatus::optimal);
    const double shift =
        (step.alloc.b - it.alloc.b).lpNorm<Eigen::Infinity>() +
        (step.alloc.p - it.alloc.p).lpNorm<Eigen::Infinity>() / s.uav.p_max_w;
    it.alloc = step.alloc;
    if (shift < 1e-7) break;
  }
  for (int n = 0; n < s.slot_count; ++n) {
    CHECK(step.alloc.b(n, 0) >= 1.0 - 1e-3);
    CHECK(step.alloc.p(n, 0) >= (1.0 - 1e-3) * s.uav.p_max_w);
  }
  expect_alloc_feasible(s, step.alloc);
}

TEST_CASE("mirrored users receive equal throughput from the resource split") {
  Scenario s = base_scenario(6, 2, 1);
  add_user(s, 350.0, 300.0, 1);
  add_user(s, 650.0, 300.0, 1);
  s.validate();
  const RateContext ctx(s);

  const Iterate it = make_iterate(s, unit_eta(2, {1}));
  const ResourceStep step = solve_resource_allocation(s, ctx, it, 1e-6);
  REQUIRE(step.status == conic::SolveStatus::optimal);
  expect_alloc_feasible(s, step.alloc);

  const double u0 = user_throughput_or_zero(ctx, 0, it.eta, step.alloc, it.traj);
  const double u1 = user_throughput_or_zero(ctx, 1, it.eta, step.alloc, it.traj);
  REQUIRE(u0 > 0.0);
  CHECK(std::abs(u0 - u1) <= 1e-6 * u0);

  // Surrogate objective never overstates the delivered min throughput; the
  // delivery schedule is untouched by a bandwidth/power change.
  const double truth = min_throughput_or_zero(ctx, it.eta, step.alloc, it.traj);
  CHECK(step.chi <= truth + 1e-6 * (1.0 + truth));
  CHECK(truth >= min_throughput_or_zero(ctx, it.eta, it.alloc, it.traj) -
                     1e-6 * (1.0 + truth));
}

TEST_CASE("zero transmit budget pins the resource objective at zero") {
  Scenario s = base_scenario(4, 2, 1);
  add_user(s, 450.0, 300.0, 1);
  s.uav.p_max_w = 0.0;  // deliberately degenerate, skip validate()
  const RateContext ctx(s);

  Iterate it = make_iterate(s, unit_eta(2, {1}));
  it.alloc.p.setZero();

  const ResourceStep step = solve_resource_allocation(s, ctx, it, 1e-6);
  CHECK(step.chi == 0.0);
  CHECK(step.status == conic::SolveStatus::optimal);
  CHECK(step.alloc.b == it.alloc.b);
  CHECK(step.alloc.p == it.alloc.p);
  CHECK(step.phi.isZero(0.0));
}

TEST_CASE("resource relinearization settles at a fixed point") {
  Scenario s = base_scenario(5, 3, 1);
  add_user(s, 420.0, 350.0, 1);
  add_user(s, 600.0, 250.0, 2);
  s.validate();
  const RateContext ctx(s);

  Iterate it = make_iterate(s, unit_eta(3, {1}));
  double prev_chi = -1.0;
  bool settled = false;
  for (int round = 0; round < 20; ++round) {
    const ResourceStep step = solve_resource_allocation(s, ctx, it, 1e-8);
    REQUIRE(step.status == conic::SolveStatus::optimal);
    it.alloc = step.alloc;
    if (round > 0 && std::abs(step.chi - prev_chi) <= 1e-6 * (1.0 + std::abs(prev_chi))) {
      settled = true;
      break;
    }
    prev_chi = step.chi;
  }
  CHECK(settled);
}

TEST_CASE("trajectory bends toward a lone user and hovers") {
  Scenario s = base_scenario(3, 2, 1);
  s.uav.v_max_mps = 500.0;  // generous speed so the mission is slack
  s.uav.start = {500.0, 500.0};
  s.uav.end = {500.0, 500.0};
  add_user(s, 500.0, 500.0, 1);
  s.validate();
  const RateContext ctx(s);

  Iterate it = make_iterate(s, unit_eta(2, {1}));
  it.alloc.b.setOnes();
  it.alloc.p.setConstant(s.uav.p_max_w);
  // Feasible but wandering incumbent path.
  it.traj.q.row(1) = Eigen::RowVector2d(610.0, 550.0);
  it.traj.q.row(2) = Eigen::RowVector2d(450.0, 400.0);

  TrajectoryStep step;
  for (int round = 0; round < 5; ++round) {
    step = solve_trajectory(s, ctx, it, 1e-8);
    REQUIRE(step.status == conic::SolveStatus::optimal);
    it.traj = step.traj;
  }
  CHECK((step.traj.pos(1) - s.users[0].position).norm() <= 1.0);
  CHECK((step.traj.pos(2) - s.users[0].position).norm() <= 1.0);
  expect_traj_feasible(s, step.traj, 1e-8);

  // Returned slack ranges echo the returned path exactly.
  for (int n = 1; n <= s.slot_count; ++n) {
    const double d2 = s.uav.altitude_m * s.uav.altitude_m +
                      (step.traj.pos(n) - s.users[0].position).squaredNorm();
    CHECK(step.nu(n - 1, 0) == doctest::Approx(d2).epsilon(1e-12));
    CHECK(step.nu(n - 1, 0) >=
          s.uav.altitude_m * s.uav.altitude_m - 1e-9);
  }

  // Independent grid search over both free waypoints (10 m lattice around
  // the user, legs filtered by the speed bound) confirms hovering wins.
  const double hover =
      min_throughput_or_zero(ctx, it.eta, it.alloc, step.traj);
  double grid_best = -1.0;
  Trajectory cand = step.traj;
  const double step_m = s.uav.v_max_mps * s.slot_duration_s;
  for (int ax = 0; ax <= 20; ++ax) {
    for (int ay = 0; ay <= 20; ++ay) {
      for (int bx = 0; bx <= 20; ++bx) {
        for (int by = 0; by <= 20; ++by) {
          cand.q.row(1) = Eigen::RowVector2d(400.0 + 10.0 * ax, 400.0 + 10.0 * ay);
          cand.q.row(2) = Eigen::RowVector2d(400.0 + 10.0 * bx, 400.0 + 10.0 * by);
          bool ok = true;
          for (int n = 1; n <= 3; ++n) {
            ok = ok && (cand.pos(n) - cand.pos(n - 1)).norm() <= step_m + 1e-9;
          }
          if (!ok) continue;
          grid_best = std::max(grid_best, min_throughput_or_zero(
                                              ctx, it.eta, it.alloc, cand));
        }
      }
    }
  }
  CHECK(hover >= grid_best - 1e-3 * (1.0 + grid_best));
}

TEST_CASE("frozen vehicle keeps the constant trajectory") {
  Scenario s = base_scenario(4, 2, 1);
  s.uav.v_max_mps = 0.0;  // deliberately degenerate, skip validate()
  s.uav.start = {500.0, 500.0};
  s.uav.end = {500.0, 500.0};
  add_user(s, 300.0, 300.0, 1);
  const RateContext ctx(s);

  const Iterate it = make_iterate(s, unit_eta(2, {1}));
  const TrajectoryStep step = solve_trajectory(s, ctx, it, 1e-6);
  CHECK(step.status == conic::SolveStatus::optimal);
  CHECK(step.traj.q == it.traj.q);

  // Objective equals the exact stationary throughput for a cached file.
  const double truth = min_throughput_or_zero(ctx, it.eta, it.alloc, step.traj);
  CHECK(step.chi == doctest::Approx(truth).epsilon(1e-9));
  for (int n = 1; n <= s.slot_count; ++n) {
    const double d2 = s.uav.altitude_m * s.uav.altitude_m +
                      (step.traj.pos(n) - s.users[0].position).squaredNorm();
    CHECK(step.nu(n - 1, 0) == doctest::Approx(d2).epsilon(1e-12));
  }
}

TEST_CASE("trajectory relinearization settles and keeps the mission feasible") {
  Scenario s = base_scenario(8, 3, 1);
  s.uav.start = {400.0, 300.0};
  s.uav.end = {600.0, 300.0};
  add_user(s, 450.0, 500.0, 1);
  add_user(s, 650.0, 200.0, 2);
  s.validate();
  const RateContext ctx(s);

  Iterate it = make_iterate(s, unit_eta(3, {1}));
  const double before =
      min_throughput_or_zero(ctx, it.eta, it.alloc, it.traj);
  double prev_chi = -1.0;
  bool settled = false;
  TrajectoryStep step;
  for (int round = 0; round < 20; ++round) {
    step = solve_trajectory(s, ctx, it, 1e-8);
    REQUIRE(step.status == conic::SolveStatus::optimal);
    it.traj = step.traj;
    expect_traj_feasible(s, step.traj, 1e-8);
    if (round > 0 && std::abs(step.chi - prev_chi) <= 1e-6 * (1.0 + std::abs(prev_chi))) {
      settled = true;
      break;
    }
    prev_chi = step.chi;
  }
  CHECK(settled);

  // Moving the path must not hurt the cached bottleneck user's throughput.
  const double after = min_throughput_or_zero(ctx, it.eta, it.alloc, it.traj);
  CHECK(after >= before - 1e-6 * (1.0 + before));
}
