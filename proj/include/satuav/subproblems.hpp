#pragma once

#include <Eigen/Core>

#include "satuav/channel.hpp"
#include "satuav/conic.hpp"
#include "satuav/scenario.hpp"
#include "satuav/types.hpp"

namespace satuav {

// Affine floor of the binarity penalty kappa * eta * (eta - 1), anchored at
// eta_prev: kappa * (eta * (2 * eta_prev - 1) - eta_prev^2). Tight at
// eta_prev; the gap to the exact penalty is kappa * (eta - eta_prev)^2.
double penalty_surrogate(double eta, double eta_prev, double kappa);

// Concave floor of the product b * phi, anchored at (b_prev, phi_prev); the
// gap is ((b + phi) - (b_prev + phi_prev))^2 / 4.
double theta_surrogate(double b, double phi, double b_prev, double phi_prev);

// Affine-in-nu floor of log2(1 + psi / nu): the tangent of that convex
// decreasing function at nu_prev. Throws std::domain_error on non-positive
// nu or nu_prev; psi must be non-negative.
double log_recip_lb(double nu, double nu_prev, double psi);

// One cache-placement step: maximizes the min-user epigraph plus the
// linearized binarity penalty (weight cur.kappa) over fractional eta,
// holding the allocation, trajectory and delivery schedule of `cur` fixed.
// A second lexicographic pass re-maximizes the penalty with the epigraph
// value pinned, steering ties between equally good placements to a
// deterministic vertex; it is kept only when it does not hurt the true
// delivered throughput.
struct CacheStep {
  CacheVector eta;
  double chi = 0.0;  // bits
  conic::SolveStatus status = conic::SolveStatus::optimal;
};
CacheStep solve_cache_placement(const Scenario& scen, const RateContext& ctx,
                                const Iterate& cur, double solver_tol);

// One bandwidth/power step: maximizes the epigraph with each slot rate's
// bilinear b*phi replaced by theta_surrogate anchored at the current
// allocation, holding the cache, trajectory and delivery schedule fixed.
struct ResourceStep {
  Allocation alloc;
  Eigen::MatrixXd phi;  // achieved spectral efficiencies, N x K
  double chi = 0.0;     // bits
  conic::SolveStatus status = conic::SolveStatus::optimal;
};
ResourceStep solve_resource_allocation(const Scenario& scen, const RateContext& ctx,
                                       const Iterate& cur, double solver_tol);

// One trajectory step: maximizes the epigraph with each slot rate replaced
// by the log_recip_lb tangent anchored at the current waypoints, holding
// the cache, allocation and delivery schedule fixed. Endpoints stay pinned;
// per-leg speed limits become cone constraints. Missions with no slack
// between the endpoints admit exactly one path, returned unchanged.
struct TrajectoryStep {
  Trajectory traj;
  Eigen::MatrixXd nu;  // squared slant ranges at the returned waypoints, N x K
  double chi = 0.0;    // bits
  conic::SolveStatus status = conic::SolveStatus::optimal;
};
TrajectoryStep solve_trajectory(const Scenario& scen, const RateContext& ctx,
                                const Iterate& cur, double solver_tol);

}  // namespace satuav
