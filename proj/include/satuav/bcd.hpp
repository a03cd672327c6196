#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "satuav/scenario.hpp"
#include "satuav/types.hpp"

namespace satuav {

// Outer-loop controls. Defaults follow the evaluation setup: outer tolerance
// 1e-4, penalty weight growing from 0.1 by 1.1x per pass up to 10.
struct SolveOptions {
  double eps_outer = 1e-4;     // stop once the relative objective change
                               // stays below this for two consecutive passes
  int max_outer = 100;         // outer pass budget
  double kappa0 = 0.1;         // initial cache-penalty weight
  double kappa_growth = 1.1;   // per-pass penalty multiplier
  double kappa_cap = 10.0;     // penalty ceiling
  double binarity_tol = 1e-3;  // elementwise cache rounding tolerance
  double solver_tol = 1e-6;    // inner conic solve tolerance
};

enum class BcdStatus { converged, max_outer, infeasible };

// Which blocks a run may update; the baselines freeze one block each.
struct BlockMask {
  bool cache = true;
  bool resource = true;
  bool trajectory = true;
};

struct Solution {
  Iterate final;  // last accepted iterate (fractional cache vector)
  // True min-user throughput in bits after each outer pass (entry 0 is the
  // initial point). Nondecreasing: every block step is kept only if it does
  // not lower this value.
  std::vector<double> objective_history;
  Eigen::VectorXd rounded_eta;          // binary placement, sum <= S
  Eigen::VectorXd per_user_throughput;  // bits per user at the rounded placement
  BcdStatus status = BcdStatus::max_outer;
  bool rounding_fallback = false;  // cache vector was not binary to tolerance
  int outer_iterations = 0;
  std::vector<std::string> events;  // rejected/failed block steps

  double objective_bits() const {
    return objective_history.empty() ? 0.0 : objective_history.back();
  }
};

// Uniform resources, straight-line path, the most popular requested files
// cached, chi set to the resulting min throughput. Throws InfeasibleError
// when the endpoints cannot be joined within the speed budget.
Iterate initialize(const Scenario& scen);

// Elementwise rounding when every entry is within binarity_tol of 0/1,
// otherwise the S largest entries win (ties to the lower file index).
Eigen::VectorXd round_cache(const CacheVector& eta, int cache_capacity,
                            double binarity_tol = 1e-3, bool* fallback = nullptr);

// Core loop: cache -> resources -> trajectory, one linearization pass per
// enabled block per outer iteration, with a keep-the-incumbent guard that
// makes the objective history nondecreasing by construction.
Solution run_blocks(const Scenario& scen, const SolveOptions& opts,
                    const BlockMask& mask);

// Full optimizer and the three reference schemes.
Solution run_bcd(const Scenario& scen, const SolveOptions& opts = {});
Solution run_bs1(const Scenario& scen, const SolveOptions& opts = {});  // straight-line path
Solution run_bs2(const Scenario& scen, const SolveOptions& opts = {});  // no cache
Solution run_bs3(const Scenario& scen, const SolveOptions& opts = {});  // uniform resources

}  // namespace satuav
