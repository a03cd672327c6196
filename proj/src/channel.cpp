#include "satuav/channel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "satuav/errors.hpp"

namespace satuav {

double zipf_prob(int f, int file_count, double rho) {
  if (f < 1 || f > file_count) {
    throw std::out_of_range("zipf_prob: file index " + std::to_string(f) +
                            " outside [1," + std::to_string(file_count) + "]");
  }
  if (!(rho >= 0.0) || rho >= 1.0) {
    throw std::domain_error("zipf_prob: exponent must lie in [0,1), got " +
                            std::to_string(rho));
  }
  double z = 0.0;
  for (int i = 1; i <= file_count; ++i) z += std::pow(i, -rho);
  return std::pow(f, -rho) / z;
}

double orbital_velocity(double altitude_m) {
  return std::sqrt(kGravitation * kEarthMassKg / (kEarthRadiusM + altitude_m));
}

double uav_user_distance(const Eigen::Vector2d& q_n, const Eigen::Vector2d& w_k,
                         double h_u) {
  return std::sqrt(h_u * h_u + (q_n - w_k).squaredNorm());
}

RateContext::RateContext(const Scenario& scen)
    : scen_(&scen),
      sat_speed_(orbital_velocity(scen.satellite.altitude_m)),
      noise1_w_(scen.backhaul_noise_w()),
      noise2_w_(scen.access_noise_w()),
      sat_origin_(scen.satellite.initial_position) {}

Eigen::Vector3d RateContext::sat_position(int n) const {
  return {sat_origin_.x() + sat_speed_ * n * scen_->slot_duration_s,
          sat_origin_.y(), scen_->satellite.altitude_m};
}

double RateContext::sat_uav_distance(int n, const Eigen::Vector2d& q_n) const {
  const Eigen::Vector3d s = sat_position(n);
  const double dz = scen_->satellite.altitude_m - scen_->uav.altitude_m;
  const double dx = s.x() - q_n.x();
  const double dy = s.y() - q_n.y();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double RateContext::backhaul_rate(int n, const Eigen::Vector2d& q_n) const {
  const double d = sat_uav_distance(n, q_n);
  const double snr = scen_->satellite.tx_power_w * scen_->radio.beta0 /
                     (std::pow(d, scen_->radio.alpha) * noise1_w_);
  return scen_->satellite.backhaul_bandwidth_hz * std::log2(1.0 + snr);
}

double RateContext::access_psi(double p) const {
  return std::exp(-scen_->radio.euler_gamma) * p * scen_->radio.beta0 / noise2_w_;
}

double RateContext::access_rate_lb(double b, double p, const Eigen::Vector2d& q_n,
                                   const Eigen::Vector2d& w_k) const {
  const double d2 = scen_->uav.altitude_m * scen_->uav.altitude_m +
                    (q_n - w_k).squaredNorm();
  const double snr = access_psi(p) / std::pow(d2, scen_->radio.alpha / 2.0);
  return b * scen_->uav.access_bandwidth_hz * std::log2(1.0 + snr);
}

std::vector<double> RateContext::backhaul_rates(const Trajectory& traj) const {
  const int n_slots = scen_->slot_count;
  if (traj.q.rows() != n_slots + 1 || traj.q.cols() != 2) {
    throw ValidationError("trajectory has " + std::to_string(traj.q.rows()) +
                          " waypoints, expected " + std::to_string(n_slots + 1));
  }
  std::vector<double> rates(n_slots);
  for (int n = 1; n <= n_slots; ++n) {
    rates[n - 1] = backhaul_rate(n, traj.pos(n));
  }
  return rates;
}

namespace {

// Slot count covering a duration, robust to x landing a hair above an
// integer from roundoff.
int ceil_slots(double duration_s, double slot_s) {
  const double x = duration_s / slot_s;
  return static_cast<int>(std::ceil(x - std::max(1.0, std::abs(x)) * 1e-12));
}

double eta_of_user(const Scenario& s, const CacheVector& eta, int k) {
  const int f = s.users[k].requested_file;
  if (eta.eta.size() != s.catalog.file_count) {
    throw ValidationError("cache vector has " + std::to_string(eta.eta.size()) +
                          " entries, expected " + std::to_string(s.catalog.file_count));
  }
  return eta.eta[f - 1];
}

}  // namespace

DeliverySchedule delivery_schedule(const RateContext& ctx, const CacheVector& eta,
                                   const Trajectory& traj) {
  const Scenario& s = ctx.scenario();
  const std::vector<double> r1 = ctx.backhaul_rates(traj);
  double mean_rate = 0.0;
  for (double r : r1) mean_rate += r;
  mean_rate /= s.slot_count;

  DeliverySchedule out;
  const int K = s.user_count();
  out.first_slot.assign(K, 1);
  out.backhaul_s.resize(K);
  out.done_slot.resize(K);
  for (int k = 0; k < K; ++k) {
    const double remainder = std::max(0.0, 1.0 - eta_of_user(s, eta, k));
    if (remainder == 0.0) {
      out.backhaul_s[k] = 0.0;
      out.done_slot[k] = 1;
      continue;
    }
    if (mean_rate <= 0.0) {
      out.backhaul_s[k] = std::numeric_limits<double>::infinity();
      out.done_slot[k] = std::numeric_limits<int>::max();
      continue;
    }
    out.backhaul_s[k] = remainder * s.catalog.file_size_bits / mean_rate;
    if (out.backhaul_s[k] / s.slot_duration_s >= 2e9) {
      out.done_slot[k] = std::numeric_limits<int>::max();
    } else {
      out.done_slot[k] = 1 + ceil_slots(out.backhaul_s[k], s.slot_duration_s);
    }
  }
  return out;
}

double backhaul_time(const RateContext& ctx, int k, const CacheVector& eta,
                     const Trajectory& traj) {
  const DeliverySchedule sched = delivery_schedule(ctx, eta, traj);
  if (std::isinf(sched.backhaul_s[k])) {
    throw InfeasibleError("user " + std::to_string(k) +
                          ": zero backhaul rate with a non-cached file");
  }
  return sched.backhaul_s[k];
}

int delivery_slot(const RateContext& ctx, int k, const CacheVector& eta,
                  const Trajectory& traj) {
  const DeliverySchedule sched = delivery_schedule(ctx, eta, traj);
  const int n_slots = ctx.scenario().slot_count;
  if (!sched.deliverable(k, n_slots)) {
    throw InfeasibleError("user " + std::to_string(k) + ": file arrives at slot " +
                          std::to_string(sched.done_slot[k]) + ", after the " +
                          std::to_string(n_slots) + "-slot mission");
  }
  return sched.done_slot[k];
}

namespace {

double throughput_for(const RateContext& ctx, int k, const CacheVector& eta,
                      const Allocation& alloc, const Trajectory& traj,
                      int done_slot) {
  const Scenario& s = ctx.scenario();
  const int N = s.slot_count;
  if (alloc.b.rows() != N || alloc.p.rows() != N ||
      alloc.b.cols() != s.user_count() || alloc.p.cols() != s.user_count()) {
    throw ValidationError("allocation dimensions do not match the scenario");
  }
  const double eta_f = eta_of_user(s, eta, k);
  const Eigen::Vector2d w = s.users[k].position;
  double sum_all = 0.0, sum_tail = 0.0;
  for (int n = 1; n <= N; ++n) {
    const double r = ctx.access_rate_lb(alloc.b(n - 1, k), alloc.p(n - 1, k),
                                        traj.pos(n), w);
    sum_all += r;
    if (n > done_slot) sum_tail += r;
  }
  const double pop = zipf_prob(s.users[k].requested_file, s.catalog.file_count,
                               s.catalog.zipf_exponent);
  return s.slot_duration_s * pop * (eta_f * sum_all + (1.0 - eta_f) * sum_tail);
}

}  // namespace

double user_throughput(const RateContext& ctx, int k, const CacheVector& eta,
                       const Allocation& alloc, const Trajectory& traj) {
  return throughput_for(ctx, k, eta, alloc, traj, delivery_slot(ctx, k, eta, traj));
}

double user_throughput_or_zero(const RateContext& ctx, int k, const CacheVector& eta,
                               const Allocation& alloc, const Trajectory& traj) {
  // Undeliverable remainder: its tail sum is empty; the cached share, if
  // any, still flows over the whole mission.
  const DeliverySchedule sched = delivery_schedule(ctx, eta, traj);
  const int N = ctx.scenario().slot_count;
  const int done = sched.deliverable(k, N) ? sched.done_slot[k] : N;
  return throughput_for(ctx, k, eta, alloc, traj, done);
}

double min_throughput(const RateContext& ctx, const CacheVector& eta,
                      const Allocation& alloc, const Trajectory& traj) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ctx.scenario().user_count(); ++k) {
    best = std::min(best, user_throughput(ctx, k, eta, alloc, traj));
  }
  return best;
}

double min_throughput_or_zero(const RateContext& ctx, const CacheVector& eta,
                              const Allocation& alloc, const Trajectory& traj) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ctx.scenario().user_count(); ++k) {
    best = std::min(best, user_throughput_or_zero(ctx, k, eta, alloc, traj));
  }
  return best;
}

}  // namespace satuav
