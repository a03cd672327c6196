#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "satuav/bcd.hpp"
#include "satuav/scenario.hpp"

namespace satuav {

// Scenario field varied by a sweep. Power values are given in dBm (the
// natural axis unit); everything else is in the field's own unit.
enum class SweepParameter { slot_count, cache_size, file_size_bits, p_max_dbm };

std::string to_string(SweepParameter p);
SweepParameter sweep_parameter_from(const std::string& name);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::slot_count;
  std::vector<double> values;        // nonempty, strictly increasing
  std::vector<std::string> schemes;  // subset of {proposed, bs1, bs2, bs3}
  std::uint64_t seed = 1;
  int repetitions = 1;

  // Throws ValidationError on an empty or unsorted value list, an unknown
  // scheme name, or repetitions < 1.
  void validate() const;
};

struct ResultRow {
  std::string scheme;
  std::string param;
  double value = 0.0;
  double min_tp_bits = 0.0;
  double total_tp_bits = 0.0;
  int iters = 0;
  double wall_s = 0.0;
  std::uint64_t seed = 0;
  std::string status;
};

// One row per (scheme, value, repetition), in that order regardless of how
// many worker threads run the points. A single repetition evaluates the base
// scenario as given; several repetitions redraw user positions and requests
// per repetition from seed + index. Per-point failures land in the status
// column instead of aborting the sweep.
std::vector<ResultRow> run_sweep(const SweepSpec& spec, const Scenario& base,
                                 const SolveOptions& opts = {}, int jobs = 1);

// Collapses repetitions to one row per (scheme, value): the row whose
// min-throughput is the lower median, with status marking the group size.
// Rows whose status starts with "error" are left out of the grouping.
std::vector<ResultRow> median_rows(const std::vector<ResultRow>& rows);

struct CacheOracleResult {
  Eigen::VectorXd eta;          // best binary placement, ties to lex smallest
  double objective_bits = 0.0;  // min throughput at that placement
  long candidates = 0;          // placements enumerated
};

// Exhaustive search over binary placements with at most the cache capacity
// of ones, holding the allocation and trajectory fixed. Throws
// ValidationError when C(F, S) exceeds 1e5.
CacheOracleResult oracle_cache_exhaustive(const Scenario& scen,
                                          const Allocation& alloc,
                                          const Trajectory& traj);

struct ResourceOracleResult {
  Eigen::VectorXd b;    // per-user bandwidth shares, constant across slots
  Eigen::VectorXd p_w;  // per-user transmit powers, constant across slots
  double objective_bits = 0.0;
};

// Exhaustive grid over slot-uniform bandwidth and power splits at step
// 1/steps, exact throughput evaluation; one or two users only.
ResourceOracleResult oracle_resource_grid(const Scenario& scen,
                                          const CacheVector& eta,
                                          const Trajectory& traj,
                                          int steps = 200);

struct MonteCarloRate {
  double mean_bits_s = 0.0;
  double stderr_bits_s = 0.0;
};

// Empirical mean of the faded access rate b*B2*log2(1 + p|h|^2 c / d^alpha)
// with |h|^2 ~ exponential(1); the closed-form rate bound must sit below
// this mean. Requires at least 1e4 samples.
MonteCarloRate monte_carlo_rate(const Scenario& scen, double bandwidth_share,
                                double p_w, double dist_m, int samples,
                                std::uint64_t seed);

// Header: scheme,param,value,min_tp_bits,total_tp_bits,iters,wall_s,seed,status
void export_csv(const std::vector<ResultRow>& rows, const std::string& path);

// Writes <dir>/trajectory.csv (slot,x_m,y_m) and <dir>/users.csv
// (id,x_m,y_m,file), creating the directory if needed.
void export_trajectory(const Scenario& scen, const Trajectory& traj,
                       const std::string& dir);

}  // namespace satuav
