#include "satuav/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace satuav {

double dbm_to_w(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double w_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double value) { return 10.0 * std::log10(value); }

double noise_power_w(double bandwidth_hz, double noise_psd_dbm_per_hz) {
  if (!(bandwidth_hz > 0.0)) {
    throw std::domain_error("noise_power_w: bandwidth must be positive, got " +
                            std::to_string(bandwidth_hz));
  }
  return dbm_to_w(noise_psd_dbm_per_hz + 10.0 * std::log10(bandwidth_hz));
}

double uniform01(std::uint64_t raw) {
  // Top 53 bits scaled by 2^-53: the usual portable mapping.
  return static_cast<double>(raw >> 11) * 0x1.0p-53;
}

double Scenario::backhaul_noise_w() const {
  return noise_power_w(satellite.backhaul_bandwidth_hz, radio.noise_psd_dbm_per_hz);
}

double Scenario::access_noise_w() const {
  return noise_power_w(uav.access_bandwidth_hz, radio.noise_psd_dbm_per_hz);
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw ValidationError(what); }

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void Scenario::validate() const {
  if (slot_count < 2) fail("slot_count must be at least 2, got " + std::to_string(slot_count));
  if (!(slot_duration_s > 0)) fail("slot_duration_s must be positive, got " + num(slot_duration_s));
  if (!(area_side_m > 0)) fail("area_side_m must be positive, got " + num(area_side_m));

  if (catalog.file_count < 1) fail("file_count must be at least 1");
  if (!(catalog.file_size_bits > 0)) fail("file_size_bits must be positive");
  if (!(catalog.zipf_exponent > 0 && catalog.zipf_exponent < 1)) {
    fail("zipf_exponent must lie in (0,1), got " + num(catalog.zipf_exponent));
  }
  if (catalog.cache_capacity_files < 0) fail("cache_capacity_files must be non-negative");
  if (catalog.cache_capacity_files >= catalog.file_count) {
    fail("cache_capacity_files must be smaller than file_count, got S=" +
         std::to_string(catalog.cache_capacity_files) + ", F=" +
         std::to_string(catalog.file_count));
  }

  if (!(satellite.altitude_m > 0)) fail("satellite altitude_m must be positive");
  if (!(satellite.tx_power_w > 0)) fail("satellite tx_power_w must be positive");
  if (!(satellite.backhaul_bandwidth_hz > 0)) fail("backhaul_bandwidth_hz must be positive");

  if (!(uav.altitude_m > 0)) fail("uav altitude_m must be positive");
  if (!(uav.v_max_mps > 0)) fail("v_max_mps must be positive");
  if (!(uav.p_max_w > 0)) fail("p_max_w must be positive");
  if (!(uav.access_bandwidth_hz > 0)) fail("access_bandwidth_hz must be positive");
  const double reach = slot_count * uav.v_max_mps * slot_duration_s;
  const double dist = (uav.start - uav.end).norm();
  if (dist > reach * (1.0 + 1e-12)) {
    fail("uav endpoints unreachable: |start-end| = " + num(dist) +
         " m exceeds N*v_max*slot_duration = " + num(reach) + " m");
  }

  if (!(radio.beta0 > 0)) fail("beta0 must be positive");
  if (!(radio.alpha >= 2)) fail("alpha must be at least 2, got " + num(radio.alpha));
  if (!(radio.euler_gamma > 0)) fail("euler_gamma must be positive");

  if (users.empty()) fail("scenario needs at least one user");
  std::set<int> ids;
  for (const GroundUser& u : users) {
    if (u.id < 0) fail("user id must be non-negative, got " + std::to_string(u.id));
    if (!ids.insert(u.id).second) fail("duplicate user id " + std::to_string(u.id));
    if (u.requested_file < 1 || u.requested_file > catalog.file_count) {
      fail("user " + std::to_string(u.id) + " requests file " +
           std::to_string(u.requested_file) + " outside [1," +
           std::to_string(catalog.file_count) + "]");
    }
    const double pad = 1e-9 * area_side_m;
    if (u.position.x() < -pad || u.position.x() > area_side_m + pad ||
        u.position.y() < -pad || u.position.y() > area_side_m + pad) {
      fail("user " + std::to_string(u.id) + " position (" + num(u.position.x()) +
           "," + num(u.position.y()) + ") outside the " + num(area_side_m) +
           " m area square");
    }
  }
}

namespace {

using Section = std::map<std::string, std::string>;
using ConfigMap = std::map<std::string, Section>;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

ConfigMap parse_ini(std::istream& in, const std::string& origin) {
  ConfigMap out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError(where + ": empty section name");
      out[section];
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    if (section.empty()) throw ParseError(where + ": key outside any [section]");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (!out[section].emplace(key, value).second) {
      throw ParseError(where + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

double parse_num(const std::string& value, const std::string& what) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (trim(value.substr(pos)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(what + ": cannot parse number from '" + value + "'");
}

int parse_int(const std::string& value, const std::string& what) {
  double v = parse_num(value, what);
  double r = std::round(v);
  if (std::abs(v - r) > 1e-9 || std::abs(r) > 2e9) {
    throw ParseError(what + ": expected an integer, got '" + value + "'");
  }
  return static_cast<int>(r);
}

Eigen::Vector2d parse_vec2(const std::string& value, const std::string& what) {
  std::istringstream ss(value);
  double x, y;
  if (ss >> x >> y) {
    std::string rest;
    if (!(ss >> rest)) return {x, y};
  }
  throw ParseError(what + ": expected two numbers, got '" + value + "'");
}

// Applies one key from the given section; returns false for unknown keys.
bool apply_kv(Scenario& s, const std::string& sec, const std::string& key,
              const std::string& value) {
  const std::string what = "[" + sec + "] " + key;
  auto n = [&] { return parse_num(value, what); };
  auto i = [&] { return parse_int(value, what); };
  auto v2 = [&] { return parse_vec2(value, what); };

  if (sec == "time") {
    if (key == "slot_count") s.slot_count = i();
    else if (key == "slot_duration_s") s.slot_duration_s = n();
    else return false;
    return true;
  }
  if (sec == "catalog") {
    if (key == "file_count") s.catalog.file_count = i();
    else if (key == "file_size_bits") s.catalog.file_size_bits = n();
    else if (key == "file_size_mbits") s.catalog.file_size_bits = n() * 1e6;
    else if (key == "zipf_exponent") s.catalog.zipf_exponent = n();
    else if (key == "cache_capacity_files") s.catalog.cache_capacity_files = i();
    else return false;
    return true;
  }
  if (sec == "satellite") {
    if (key == "altitude_m") s.satellite.altitude_m = n();
    else if (key == "altitude_km") s.satellite.altitude_m = n() * 1e3;
    else if (key == "initial_position_m") s.satellite.initial_position = v2();
    else if (key == "initial_position_km") s.satellite.initial_position = v2() * 1e3;
    else if (key == "tx_power_w") s.satellite.tx_power_w = n();
    else if (key == "tx_power_dbm") s.satellite.tx_power_w = dbm_to_w(n());
    else if (key == "backhaul_bandwidth_hz") s.satellite.backhaul_bandwidth_hz = n();
    else if (key == "backhaul_bandwidth_mhz") s.satellite.backhaul_bandwidth_hz = n() * 1e6;
    else return false;
    return true;
  }
  if (sec == "uav") {
    if (key == "altitude_m") s.uav.altitude_m = n();
    else if (key == "altitude_km") s.uav.altitude_m = n() * 1e3;
    else if (key == "v_max_mps") s.uav.v_max_mps = n();
    else if (key == "p_max_w") s.uav.p_max_w = n();
    else if (key == "p_max_dbm") s.uav.p_max_w = dbm_to_w(n());
    else if (key == "access_bandwidth_hz") s.uav.access_bandwidth_hz = n();
    else if (key == "access_bandwidth_mhz") s.uav.access_bandwidth_hz = n() * 1e6;
    else if (key == "start_m") s.uav.start = v2();
    else if (key == "start_km") s.uav.start = v2() * 1e3;
    else if (key == "end_m") s.uav.end = v2();
    else if (key == "end_km") s.uav.end = v2() * 1e3;
    else return false;
    return true;
  }
  if (sec == "radio") {
    if (key == "beta0") s.radio.beta0 = n();
    else if (key == "beta0_db") s.radio.beta0 = db_to_linear(n());
    else if (key == "alpha") s.radio.alpha = n();
    else if (key == "noise_psd_dbm_per_hz") s.radio.noise_psd_dbm_per_hz = n();
    else if (key == "euler_gamma") s.radio.euler_gamma = n();
    else return false;
    return true;
  }
  if (sec == "users") {
    if (key == "count") return true;  // handled by the caller
    if (key == "area_side_m") {
      s.area_side_m = n();
      return true;
    }
    if (key.rfind("user", 0) == 0) {
      int id = parse_int(key.substr(4), what + " (user index)");
      std::istringstream ss(value);
      double x, y;
      int f;
      std::string rest;
      if (!(ss >> x >> y >> f) || (ss >> rest)) {
        throw ParseError(what + ": expected 'x_m y_m file', got '" + value + "'");
      }
      GroundUser u;
      u.id = id;
      u.position = {x, y};
      u.requested_file = f;
      s.users.push_back(u);
      return true;
    }
    return false;
  }
  return false;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  ConfigMap cfg = parse_ini(in, path);

  Scenario s;
  s.users.clear();
  for (const auto& [sec, kv] : cfg) {
    for (const auto& [key, value] : kv) {
      if (!apply_kv(s, sec, key, value)) {
        throw ParseError(path + ": unknown key '" + key + "' in section [" + sec + "]");
      }
    }
  }
  if (auto us = cfg.find("users"); us != cfg.end()) {
    if (auto c = us->second.find("count"); c != us->second.end()) {
      int declared = parse_int(c->second, "[users] count");
      if (declared != static_cast<int>(s.users.size())) {
        throw ParseError(path + ": [users] count=" + std::to_string(declared) +
                         " but " + std::to_string(s.users.size()) + " user lines present");
      }
    }
  }
  // Map keys come back sorted by name (user0, user1, user10, ...); restore id order.
  std::sort(s.users.begin(), s.users.end(),
            [](const GroundUser& a, const GroundUser& b) { return a.id < b.id; });
  if (s.radio.alpha != 2.0) {
    throw ValidationError(path + ": path-loss exponent alpha must be 2 "
                          "(cone form of the distance constraints), got " +
                          num(s.radio.alpha));
  }
  s.validate();
  return s;
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  auto d = [](double v) { return num(v); };
  out << "[time]\n";
  out << "slot_count = " << s.slot_count << "\n";
  out << "slot_duration_s = " << d(s.slot_duration_s) << "\n\n";
  out << "[catalog]\n";
  out << "file_count = " << s.catalog.file_count << "\n";
  out << "file_size_bits = " << d(s.catalog.file_size_bits) << "\n";
  out << "zipf_exponent = " << d(s.catalog.zipf_exponent) << "\n";
  out << "cache_capacity_files = " << s.catalog.cache_capacity_files << "\n\n";
  out << "[satellite]\n";
  out << "altitude_m = " << d(s.satellite.altitude_m) << "\n";
  out << "initial_position_m = " << d(s.satellite.initial_position.x()) << " "
      << d(s.satellite.initial_position.y()) << "\n";
  out << "tx_power_w = " << d(s.satellite.tx_power_w) << "\n";
  out << "backhaul_bandwidth_hz = " << d(s.satellite.backhaul_bandwidth_hz) << "\n\n";
  out << "[uav]\n";
  out << "altitude_m = " << d(s.uav.altitude_m) << "\n";
  out << "v_max_mps = " << d(s.uav.v_max_mps) << "\n";
  out << "p_max_w = " << d(s.uav.p_max_w) << "\n";
  out << "access_bandwidth_hz = " << d(s.uav.access_bandwidth_hz) << "\n";
  out << "start_m = " << d(s.uav.start.x()) << " " << d(s.uav.start.y()) << "\n";
  out << "end_m = " << d(s.uav.end.x()) << " " << d(s.uav.end.y()) << "\n\n";
  out << "[radio]\n";
  out << "beta0 = " << d(s.radio.beta0) << "\n";
  out << "alpha = " << d(s.radio.alpha) << "\n";
  out << "noise_psd_dbm_per_hz = " << d(s.radio.noise_psd_dbm_per_hz) << "\n";
  out << "euler_gamma = " << d(s.radio.euler_gamma) << "\n\n";
  out << "[users]\n";
  out << "count = " << s.users.size() << "\n";
  out << "area_side_m = " << d(s.area_side_m) << "\n";
  for (const GroundUser& u : s.users) {
    out << "user" << u.id << " = " << d(u.position.x()) << " " << d(u.position.y())
        << " " << u.requested_file << "\n";
  }
  if (!out) throw ParseError("write failed: " + path);
}

Scenario generate_scenario(std::uint64_t seed, int user_count, double area_side_m) {
  if (user_count < 1) {
    throw ValidationError("generate_scenario: user_count must be at least 1");
  }
  Scenario s;  // field initializers carry the default parameter set
  s.area_side_m = area_side_m;
  s.satellite.tx_power_w = dbm_to_w(49.03);
  s.uav.p_max_w = dbm_to_w(15.0);

  // Zipf cumulative distribution over file indices.
  std::vector<double> cum(s.catalog.file_count);
  double z = 0.0;
  for (int f = 1; f <= s.catalog.file_count; ++f) {
    z += std::pow(static_cast<double>(f), -s.catalog.zipf_exponent);
    cum[f - 1] = z;
  }

  std::mt19937_64 rng(seed);
  s.users.resize(user_count);
  for (int k = 0; k < user_count; ++k) {
    GroundUser& u = s.users[k];
    u.id = k;
    u.position.x() = uniform01(rng()) * area_side_m;
    u.position.y() = uniform01(rng()) * area_side_m;
    const double target = uniform01(rng()) * z;
    int f = 1;
    while (f < s.catalog.file_count && cum[f - 1] < target) ++f;
    u.requested_file = f;
  }
  return s;
}

void apply_override(Scenario& s, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ParseError("override '" + assignment + "': expected section.key=value");
  }
  std::string lhs = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  size_t dot = lhs.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == lhs.size()) {
    throw ParseError("override '" + assignment + "': expected section.key=value");
  }
  std::string sec = lhs.substr(0, dot);
  std::string key = lhs.substr(dot + 1);
  if (!apply_kv(s, sec, key, value)) {
    throw ParseError("override: unknown key '" + key + "' in section [" + sec + "]");
  }
}

}  // namespace satuav
