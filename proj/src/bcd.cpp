#include "satuav/bcd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "satuav/channel.hpp"
#include "satuav/errors.hpp"
#include "satuav/subproblems.hpp"

namespace satuav {

namespace {

std::string status_word(conic::SolveStatus st) {
  switch (st) {
    case conic::SolveStatus::optimal: return "optimal";
    case conic::SolveStatus::infeasible: return "infeasible";
    default: return "iteration budget exhausted";
  }
}

// Linearization anchors must sit exactly on the iterate: psi from the
// powers, nu from the waypoints, phi from both. Solver outputs carry
// O(tol) slack and would anchor the next surrogate off the incumbent,
// turning model-improving directions into true descent.
void tighten_anchors(const Scenario& scen, const RateContext& ctx, Iterate& it) {
  const int N = scen.slot_count;
  const int K = scen.user_count();
  const double h2 = scen.uav.altitude_m * scen.uav.altitude_m;
  it.psi.resize(N, K);
  it.slack_phi.resize(N, K);
  it.slack_nu.resize(N, K);
  for (int n = 1; n <= N; ++n) {
    for (int k = 0; k < K; ++k) {
      const double d2 =
          h2 + (it.traj.pos(n) - scen.users[k].position).squaredNorm();
      it.psi(n - 1, k) = ctx.access_psi(it.alloc.p(n - 1, k));
      it.slack_nu(n - 1, k) = d2;
      it.slack_phi(n - 1, k) = std::log2(1.0 + it.psi(n - 1, k) / d2);
    }
  }
}

}  // namespace

Iterate initialize(const Scenario& scen) {
  const int N = scen.slot_count;
  const int K = scen.user_count();
  const double reach = N * scen.uav.v_max_mps * scen.slot_duration_s;
  const double chord = (scen.uav.end - scen.uav.start).norm();
  if (chord > reach * (1.0 + 1e-12)) {
    throw InfeasibleError("uav endpoints unreachable: mission needs " +
                          std::to_string(chord) + " m but the speed budget covers " +
                          std::to_string(reach) + " m");
  }

  Iterate it;
  it.alloc.b = Eigen::MatrixXd::Constant(N, K, 1.0 / K);
  it.alloc.p = Eigen::MatrixXd::Constant(N, K, scen.uav.p_max_w / K);

  it.traj.q.resize(N + 1, 2);
  for (int n = 0; n <= N; ++n) {
    const double a = static_cast<double>(n) / N;
    it.traj.q.row(n) = ((1.0 - a) * scen.uav.start + a * scen.uav.end).transpose();
  }

  // Cache the most popular requested files (popularity strictly falls with
  // the file index, so that is the lowest requested indices).
  it.eta.eta = Eigen::VectorXd::Zero(scen.catalog.file_count);
  std::set<int> requested;
  for (const GroundUser& u : scen.users) requested.insert(u.requested_file - 1);
  int budget = scen.catalog.cache_capacity_files;
  for (int f : requested) {
    if (budget == 0) break;
    it.eta.eta[f] = 1.0;
    --budget;
  }

  const RateContext ctx(scen);
  it.chi = min_throughput_or_zero(ctx, it.eta, it.alloc, it.traj);
  tighten_anchors(scen, ctx, it);
  return it;
}

Eigen::VectorXd round_cache(const CacheVector& eta, int cache_capacity,
                            double binarity_tol, bool* fallback) {
  const Eigen::VectorXd& e = eta.eta;
  bool binary = true;
  for (int f = 0; f < e.size(); ++f) {
    if (std::min(e[f], 1.0 - e[f]) > binarity_tol) {
      binary = false;
      break;
    }
  }
  if (fallback != nullptr) *fallback = !binary;

  Eigen::VectorXd out = Eigen::VectorXd::Zero(e.size());
  if (binary) {
    for (int f = 0; f < e.size(); ++f) out[f] = e[f] >= 0.5 ? 1.0 : 0.0;
    return out;
  }
  std::vector<int> order(e.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return e[a] > e[b]; });
  for (int i = 0; i < cache_capacity && i < static_cast<int>(order.size()); ++i) {
    out[order[i]] = 1.0;
  }
  return out;
}

Solution run_blocks(const Scenario& scen, const SolveOptions& opts,
                    const BlockMask& mask) {
  const RateContext ctx(scen);
  Iterate cur = initialize(scen);
  if (!mask.cache) cur.eta.eta.setZero();
  cur.kappa = opts.kappa0;

  Solution sol;
  double value = min_throughput_or_zero(ctx, cur.eta, cur.alloc, cur.traj);
  cur.chi = value;
  sol.objective_history.push_back(value);

  bool saw_infeasible = false;
  int calm_outers = 0;  // consecutive passes below the improvement threshold

  // Accept a candidate only when it does not lower the true objective; the
  // history is then nondecreasing no matter what the surrogates proposed.
  auto consider = [&](int outer, const char* name, Iterate cand,
                      conic::SolveStatus st) {
    if (st != conic::SolveStatus::optimal) {
      saw_infeasible = saw_infeasible || st == conic::SolveStatus::infeasible;
      sol.events.push_back("outer " + std::to_string(outer) + ": " + name +
                           " step " + status_word(st));
    }
    const double v =
        min_throughput_or_zero(ctx, cand.eta, cand.alloc, cand.traj);
    if (v >= value) {
      cand.chi = v;
      cur = std::move(cand);
      tighten_anchors(scen, ctx, cur);
      value = v;
    } else {
      sol.events.push_back("outer " + std::to_string(outer) + ": " + name +
                           " step would lower the objective, keeping incumbent");
    }
  };

  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    if (mask.cache) {
      try {
        const CacheStep step = solve_cache_placement(scen, ctx, cur, opts.solver_tol);
        Iterate cand = cur;
        cand.eta = step.eta;
        consider(outer, "cache", std::move(cand), step.status);
      } catch (const std::runtime_error& e) {
        sol.events.push_back("outer " + std::to_string(outer) + ": cache step failed (" +
                             e.what() + "), keeping incumbent");
      }
    }
    if (mask.resource) {
      try {
        const ResourceStep step =
            solve_resource_allocation(scen, ctx, cur, opts.solver_tol);
        Iterate cand = cur;
        cand.alloc = step.alloc;
        consider(outer, "resource", std::move(cand), step.status);
      } catch (const std::runtime_error& e) {
        sol.events.push_back("outer " + std::to_string(outer) +
                             ": resource step failed (" + e.what() +
                             "), keeping incumbent");
      }
    }
    if (mask.trajectory) {
      try {
        const TrajectoryStep step = solve_trajectory(scen, ctx, cur, opts.solver_tol);
        Iterate cand = cur;
        cand.traj = step.traj;
        consider(outer, "trajectory", std::move(cand), step.status);
      } catch (const std::runtime_error& e) {
        sol.events.push_back("outer " + std::to_string(outer) +
                             ": trajectory step failed (" + e.what() +
                             "), keeping incumbent");
      }
    }

    const double prev = sol.objective_history.back();
    sol.objective_history.push_back(value);
    sol.outer_iterations = outer;
    // One quiet pass is not convergence: a truncated inner solve can stall
    // an outer iteration and resume on the next, so stop only after the
    // improvement stays below threshold twice in a row.
    if (value - prev <= opts.eps_outer * std::max(1.0, std::abs(prev))) {
      if (++calm_outers >= 2) {
        sol.status = BcdStatus::converged;
        break;
      }
    } else {
      calm_outers = 0;
    }
    cur.kappa = std::min(cur.kappa * opts.kappa_growth, opts.kappa_cap);
  }

  for (size_t j = 0; j + 1 < sol.objective_history.size(); ++j) {
    if (sol.objective_history[j + 1] < sol.objective_history[j] - 1e-9) {
      throw SolverError("internal error: objective decreased between passes " +
                        std::to_string(j) + " and " + std::to_string(j + 1));
    }
  }

  if (sol.status != BcdStatus::converged && saw_infeasible &&
      value <= sol.objective_history.front()) {
    sol.status = BcdStatus::infeasible;
  }

  sol.rounded_eta = round_cache(cur.eta, scen.catalog.cache_capacity_files,
                                opts.binarity_tol, &sol.rounding_fallback);
  CacheVector rounded;
  rounded.eta = sol.rounded_eta;
  sol.per_user_throughput.resize(scen.user_count());
  for (int k = 0; k < scen.user_count(); ++k) {
    sol.per_user_throughput[k] =
        user_throughput_or_zero(ctx, k, rounded, cur.alloc, cur.traj);
  }
  sol.final = std::move(cur);
  return sol;
}

Solution run_bcd(const Scenario& scen, const SolveOptions& opts) {
  return run_blocks(scen, opts, BlockMask{true, true, true});
}

Solution run_bs1(const Scenario& scen, const SolveOptions& opts) {
  return run_blocks(scen, opts, BlockMask{true, true, false});
}

Solution run_bs2(const Scenario& scen, const SolveOptions& opts) {
  return run_blocks(scen, opts, BlockMask{false, true, true});
}

Solution run_bs3(const Scenario& scen, const SolveOptions& opts) {
  return run_blocks(scen, opts, BlockMask{true, false, true});
}

}  // namespace satuav
