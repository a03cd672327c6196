#pragma once

#include <vector>

#include "satuav/scenario.hpp"
#include "satuav/types.hpp"

namespace satuav {

inline constexpr double kGravitation = 6.67259e-11;   // m^3 kg^-1 s^-2
inline constexpr double kEarthMassKg = 5.9736e24;
inline constexpr double kEarthRadiusM = 6.371e6;

// f^-rho / sum_i i^-rho over the catalog. Throws std::out_of_range for f
// outside [1, file_count], std::domain_error for rho outside [0, 1).
double zipf_prob(int f, int file_count, double rho);

// Circular-orbit speed at the given altitude above the mean Earth radius.
double orbital_velocity(double altitude_m);

// Slant range from a hovering altitude H_u to a ground point.
double uav_user_distance(const Eigen::Vector2d& q_n, const Eigen::Vector2d& w_k,
                         double h_u);

// Precomputed link-budget context: satellite ground-track positions per slot
// and the two receiver noise powers. The satellite starts at the configured
// initial position and advances along +x by v_s * slot_duration per slot.
class RateContext {
 public:
  explicit RateContext(const Scenario& scen);

  const Scenario& scenario() const { return *scen_; }
  double sat_speed_mps() const { return sat_speed_; }
  double backhaul_noise_w() const { return noise1_w_; }
  double access_noise_w() const { return noise2_w_; }

  // Satellite position at slot index n in [0, N].
  Eigen::Vector3d sat_position(int n) const;

  // 3-D range from the satellite at slot n to the UAV at (q_n, H_u).
  double sat_uav_distance(int n, const Eigen::Vector2d& q_n) const;

  // Deterministic line-of-sight backhaul rate in bit/s at slot n.
  double backhaul_rate(int n, const Eigen::Vector2d& q_n) const;

  // Fading-averaged access-rate lower bound in bit/s for bandwidth fraction
  // b and power p towards a user at w_k.
  double access_rate_lb(double b, double p, const Eigen::Vector2d& q_n,
                        const Eigen::Vector2d& w_k) const;

  // SNR numerator e^-gamma * p * beta0 / sigma2: access_rate_lb equals
  // b*B2*log2(1 + access_psi(p) / dist^alpha).
  double access_psi(double p) const;

  // Per-slot backhaul rates (bit/s) along a trajectory, index i = slot i+1.
  std::vector<double> backhaul_rates(const Trajectory& traj) const;

 private:
  const Scenario* scen_;
  double sat_speed_;
  double noise1_w_;
  double noise2_w_;
  Eigen::Vector2d sat_origin_;
};

// Per-user delivery bookkeeping. done_slot may exceed slot_count (or be
// INT_MAX when the backhaul rate is zero); such users receive nothing
// within the mission and deliverable() reports false.
struct DeliverySchedule {
  std::vector<int> first_slot;     // always 1
  std::vector<double> backhaul_s;  // satellite transfer time t1k
  std::vector<int> done_slot;      // n2k = 1 + ceil(t1k / slot_duration)

  bool deliverable(int k, int slot_count) const {
    return done_slot[k] <= slot_count;
  }
};

// Schedule for every user; never throws (out-of-horizon users are encoded).
DeliverySchedule delivery_schedule(const RateContext& ctx, const CacheVector& eta,
                                   const Trajectory& traj);

// Satellite time to push the non-cached share of user k's file, using the
// mission-average backhaul rate. Throws InfeasibleError when that rate is
// zero and the file is not fully cached.
double backhaul_time(const RateContext& ctx, int k, const CacheVector& eta,
                     const Trajectory& traj);

// First slot from which user k can be served its own content. Throws
// InfeasibleError when delivery cannot finish within the mission.
int delivery_slot(const RateContext& ctx, int k, const CacheVector& eta,
                  const Trajectory& traj);

// Popularity-weighted bits delivered to user k over the mission. Fractional
// eta blends the cached (full-horizon) and non-cached (post-delivery) sums.
double user_throughput(const RateContext& ctx, int k, const CacheVector& eta,
                       const Allocation& alloc, const Trajectory& traj);

// Same, but an undeliverable file contributes zero instead of throwing.
double user_throughput_or_zero(const RateContext& ctx, int k, const CacheVector& eta,
                               const Allocation& alloc, const Trajectory& traj);

double min_throughput(const RateContext& ctx, const CacheVector& eta,
                      const Allocation& alloc, const Trajectory& traj);

double min_throughput_or_zero(const RateContext& ctx, const CacheVector& eta,
                              const Allocation& alloc, const Trajectory& traj);

}  // namespace satuav
