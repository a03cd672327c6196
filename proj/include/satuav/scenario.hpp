#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "satuav/errors.hpp"

namespace satuav {

// Unit conversions used throughout. Powers are stored in watts, gains in
// linear scale, distances in meters, bandwidths in Hz, rates in bit/s.
double dbm_to_w(double dbm);
double w_to_dbm(double watts);
double db_to_linear(double db);
double linear_to_db(double value);

// Thermal noise over `bandwidth_hz` for a given noise power spectral
// density. Throws std::domain_error for non-positive bandwidth.
double noise_power_w(double bandwidth_hz, double noise_psd_dbm_per_hz = -174.0);

struct GroundUser {
  int id = 0;                        // unique, non-negative
  Eigen::Vector2d position{0.0, 0.0};  // meters, ground plane
  int requested_file = 1;            // 1-based index into the catalog
};

struct ContentCatalog {
  int file_count = 30;
  double file_size_bits = 40e6;     // identical size for every file
  double zipf_exponent = 0.8;       // popularity skew, >= 0
  int cache_capacity_files = 10;    // UAV cache budget, < file_count
};

struct SatelliteParams {
  double altitude_m = 2000e3;
  Eigen::Vector2d initial_position{-345e3, 0.0};  // ground-track start, meters
  double tx_power_w = 80.0;                       // about 49 dBm
  double backhaul_bandwidth_hz = 50e6;            // per-user satellite link
};

struct UavParams {
  double altitude_m = 1000.0;
  double v_max_mps = 50.0;
  double p_max_w = 0.0316227766016838;  // 15 dBm transmit budget
  double access_bandwidth_hz = 20e6;    // per-user UAV link
  Eigen::Vector2d start{1000.0, 700.0};
  Eigen::Vector2d end{300.0, 0.0};
};

struct RadioParams {
  double beta0 = 1e-4;                   // channel gain at 1 m, linear
  double alpha = 2.0;                    // path-loss exponent
  double noise_psd_dbm_per_hz = -174.0;  // thermal noise density
  double euler_gamma = 0.5772156649;     // appears as e^{-gamma} in the rate bound
};

// Full problem instance: mission timing, content catalog, link budgets and
// the set of ground users with their requested files.
struct Scenario {
  int slot_count = 40;           // N
  double slot_duration_s = 0.5;  // seconds per slot
  double area_side_m = 1000.0;   // square service area side
  ContentCatalog catalog;
  SatelliteParams satellite;
  UavParams uav;
  RadioParams radio;
  std::vector<GroundUser> users;

  int user_count() const { return static_cast<int>(users.size()); }
  double horizon_s() const { return slot_count * slot_duration_s; }
  double backhaul_noise_w() const;
  double access_noise_w() const;

  // Throws ValidationError naming the first violated invariant: positive
  // counts and durations, cache budget below catalog size, requested files
  // in range, unique user ids, users inside the area, and UAV endpoints
  // reachable within the horizon at v_max.
  void validate() const;
};

// Reads an INI-style scenario file. Throws ParseError on malformed input,
// ValidationError if the parsed scenario is invalid.
Scenario load_scenario(const std::string& path);

// Writes a file load_scenario reads back to within 1e-12 relative error.
void save_scenario(const Scenario& scenario, const std::string& path);

// Default-parameter scenario with `user_count` users placed uniformly in
// the square area, requested files drawn from the catalog's Zipf
// popularity law. Same seed, same scenario, on every platform.
Scenario generate_scenario(std::uint64_t seed, int user_count,
                           double area_side_m = 1000.0);

// Applies "section.key=value" overrides, e.g. "uav.p_max_dbm=20".
// Throws ParseError for unknown keys or unparseable values.
void apply_override(Scenario& scenario, const std::string& assignment);

// Portable uniform double in [0, 1) from one 64-bit draw; fixes the
// bit-to-double mapping so streams match across platforms.
double uniform01(std::uint64_t raw);

}  // namespace satuav
