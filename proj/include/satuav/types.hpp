#pragma once

#include <Eigen/Core>

namespace satuav {

// Indexing conventions shared by the optimizer blocks:
//  - slot matrices (b, p, slacks) are N x K, row i holding slot n = i+1;
//  - trajectories are (N+1) x 2, row n holding waypoint q_n, n = 0..N;
//  - cache vectors have F entries, entry f-1 holding file f.

struct CacheVector {
  Eigen::VectorXd eta;  // per-file caching level in [0,1]
};

struct Allocation {
  Eigen::MatrixXd b;  // bandwidth fractions, sum over users <= 1 per slot
  Eigen::MatrixXd p;  // transmit powers in watts, sum <= p_max per slot
};

struct Trajectory {
  Eigen::MatrixXd q;  // waypoints in meters

  Eigen::Vector2d pos(int n) const { return q.row(n).transpose(); }
  int leg_count() const { return static_cast<int>(q.rows()) - 1; }
};

// One full optimizer state carried between block passes.
struct Iterate {
  CacheVector eta;
  Allocation alloc;
  Trajectory traj;
  double chi = 0.0;    // bits, epigraph value of the worst user's throughput
  double kappa = 0.1;  // current cache-penalty weight
  Eigen::MatrixXd slack_phi;  // per-slot spectral efficiencies (bit/s/Hz)
  Eigen::MatrixXd slack_nu;   // distance slacks, >= H_u^alpha
  Eigen::MatrixXd psi;        // per-slot access SNR numerators (power * gain / noise)
};

}  // namespace satuav
