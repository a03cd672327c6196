#include "satuav/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "satuav/channel.hpp"
#include "satuav/errors.hpp"

namespace satuav {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string scheme_status(BcdStatus st) {
  switch (st) {
    case BcdStatus::converged: return "converged";
    case BcdStatus::max_outer: return "max-outer";
    default: return "infeasible";
  }
}

Solution run_scheme(const std::string& scheme, const Scenario& scen,
                    const SolveOptions& opts) {
  if (scheme == "proposed") return run_bcd(scen, opts);
  if (scheme == "bs1") return run_bs1(scen, opts);
  if (scheme == "bs2") return run_bs2(scen, opts);
  if (scheme == "bs3") return run_bs3(scen, opts);
  throw ValidationError("unknown scheme '" + scheme + "'");
}

void apply_sweep_value(Scenario& s, SweepParameter p, double value) {
  switch (p) {
    case SweepParameter::slot_count:
      s.slot_count = static_cast<int>(std::llround(value));
      break;
    case SweepParameter::cache_size:
      s.catalog.cache_capacity_files = static_cast<int>(std::llround(value));
      break;
    case SweepParameter::file_size_bits:
      s.catalog.file_size_bits = value;
      break;
    case SweepParameter::p_max_dbm:
      s.uav.p_max_w = dbm_to_w(value);
      break;
  }
}

// Fresh user positions and requests for one repetition; everything else in
// the scenario stays as configured.
void resample_users(Scenario& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> cum(s.catalog.file_count);
  double z = 0.0;
  for (int f = 1; f <= s.catalog.file_count; ++f) {
    z += std::pow(static_cast<double>(f), -s.catalog.zipf_exponent);
    cum[f - 1] = z;
  }
  for (GroundUser& u : s.users) {
    u.position.x() = u01(rng) * s.area_side_m;
    u.position.y() = u01(rng) * s.area_side_m;
    const double target = u01(rng) * z;
    int f = 1;
    while (f < s.catalog.file_count && cum[f - 1] < target) ++f;
    u.requested_file = f;
  }
}

ResultRow run_point(const SweepSpec& spec, const Scenario& base,
                    const SolveOptions& opts, const std::string& scheme,
                    double value, int rep) {
  ResultRow row;
  row.scheme = scheme;
  row.param = to_string(spec.parameter);
  row.value = value;
  row.seed = spec.seed + static_cast<std::uint64_t>(rep);
  try {
    Scenario s = base;
    apply_sweep_value(s, spec.parameter, value);
    if (spec.repetitions > 1) resample_users(s, row.seed);
    s.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const Solution sol = run_scheme(scheme, s, opts);
    const auto t1 = std::chrono::steady_clock::now();
    row.min_tp_bits = sol.per_user_throughput.minCoeff();
    row.total_tp_bits = sol.per_user_throughput.sum();
    row.iters = sol.outer_iterations;
    row.wall_s = std::chrono::duration<double>(t1 - t0).count();
    row.status = scheme_status(sol.status);
  } catch (const std::exception& e) {
    std::string what = e.what();
    std::replace(what.begin(), what.end(), ',', ';');
    row.status = "error: " + what;
  }
  return row;
}

}  // namespace

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::slot_count: return "slot_count";
    case SweepParameter::cache_size: return "cache_size";
    case SweepParameter::file_size_bits: return "file_size_bits";
    default: return "p_max_dbm";
  }
}

SweepParameter sweep_parameter_from(const std::string& name) {
  if (name == "slot_count") return SweepParameter::slot_count;
  if (name == "cache_size") return SweepParameter::cache_size;
  if (name == "file_size_bits") return SweepParameter::file_size_bits;
  if (name == "p_max_dbm" || name == "p_max") return SweepParameter::p_max_dbm;
  throw ParseError("unknown sweep parameter '" + name + "'");
}

void SweepSpec::validate() const {
  if (values.empty()) throw ValidationError("sweep: values list is empty");
  for (size_t i = 0; i + 1 < values.size(); ++i) {
    if (!(values[i] < values[i + 1])) {
      throw ValidationError("sweep: values must be strictly increasing, got " +
                            num(values[i]) + " before " + num(values[i + 1]));
    }
  }
  if (schemes.empty()) throw ValidationError("sweep: schemes list is empty");
  for (const std::string& s : schemes) {
    if (s != "proposed" && s != "bs1" && s != "bs2" && s != "bs3") {
      throw ValidationError("sweep: unknown scheme '" + s + "'");
    }
  }
  if (repetitions < 1) {
    throw ValidationError("sweep: repetitions must be at least 1, got " +
                          std::to_string(repetitions));
  }
}

std::vector<ResultRow> run_sweep(const SweepSpec& spec, const Scenario& base,
                                 const SolveOptions& opts, int jobs) {
  spec.validate();
  struct Point {
    std::string scheme;
    double value;
    int rep;
  };
  std::vector<Point> points;
  for (const std::string& scheme : spec.schemes) {
    for (double value : spec.values) {
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        points.push_back({scheme, value, rep});
      }
    }
  }

  std::vector<ResultRow> rows(points.size());
  if (jobs <= 1 || points.size() <= 1) {
    for (size_t i = 0; i < points.size(); ++i) {
      rows[i] = run_point(spec, base, opts, points[i].scheme, points[i].value,
                          points[i].rep);
    }
    return rows;
  }

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < points.size();
         i = next.fetch_add(1)) {
      rows[i] = run_point(spec, base, opts, points[i].scheme, points[i].value,
                          points[i].rep);
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(jobs, static_cast<int>(points.size()));
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return rows;
}

std::vector<ResultRow> median_rows(const std::vector<ResultRow>& rows) {
  std::vector<ResultRow> out;
  std::vector<char> used(rows.size(), 0);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (used[i] || rows[i].status.rfind("error", 0) == 0) continue;
    std::vector<const ResultRow*> group;
    for (size_t j = i; j < rows.size(); ++j) {
      if (!used[j] && rows[j].scheme == rows[i].scheme &&
          rows[j].value == rows[i].value &&
          rows[j].status.rfind("error", 0) != 0) {
        group.push_back(&rows[j]);
        used[j] = 1;
      }
    }
    std::sort(group.begin(), group.end(),
              [](const ResultRow* a, const ResultRow* b) {
                return a->min_tp_bits < b->min_tp_bits;
              });
    ResultRow rep = *group[(group.size() - 1) / 2];
    rep.status = "median-of-" + std::to_string(group.size());
    out.push_back(std::move(rep));
  }
  return out;
}

CacheOracleResult oracle_cache_exhaustive(const Scenario& scen,
                                          const Allocation& alloc,
                                          const Trajectory& traj) {
  const int F = scen.catalog.file_count;
  const int S = std::min(scen.catalog.cache_capacity_files, F);
  double binom = 1.0;
  for (int i = 1; i <= S; ++i) binom *= double(F - i + 1) / double(i);
  if (binom > 1e5) {
    throw ValidationError("cache oracle: C(" + std::to_string(F) + ", " +
                          std::to_string(S) + ") placements exceed the 1e5 "
                          "enumeration limit");
  }

  const RateContext ctx(scen);
  CacheOracleResult best;
  best.objective_bits = -std::numeric_limits<double>::infinity();
  CacheVector cand;
  cand.eta = Eigen::VectorXd::Zero(F);

  auto consider = [&](const std::vector<int>& ones) {
    cand.eta.setZero();
    for (int f : ones) cand.eta[f] = 1.0;
    ++best.candidates;
    const double v = min_throughput_or_zero(ctx, cand, alloc, traj);
    if (best.eta.size() == 0) {
      best.eta = cand.eta;
      best.objective_bits = v;
      return;
    }
    if (v > best.objective_bits ||
        (v == best.objective_bits &&
         std::lexicographical_compare(cand.eta.data(), cand.eta.data() + F,
                                      best.eta.data(), best.eta.data() + F))) {
      best.eta = cand.eta;
      best.objective_bits = v;
    }
  };

  std::vector<int> ones;
  consider(ones);
  for (int size = 1; size <= S; ++size) {
    ones.resize(size);
    for (int i = 0; i < size; ++i) ones[i] = i;
    while (true) {
      consider(ones);
      int i = size - 1;
      while (i >= 0 && ones[i] == F - size + i) --i;
      if (i < 0) break;
      ++ones[i];
      for (int j = i + 1; j < size; ++j) ones[j] = ones[j - 1] + 1;
    }
  }
  return best;
}

ResourceOracleResult oracle_resource_grid(const Scenario& scen,
                                          const CacheVector& eta,
                                          const Trajectory& traj, int steps) {
  const int K = scen.user_count();
  if (K < 1 || K > 2) {
    throw ValidationError("resource oracle: supports one or two users, got " +
                          std::to_string(K));
  }
  if (steps < 1) throw ValidationError("resource oracle: steps must be >= 1");

  const int N = scen.slot_count;
  const double P = scen.uav.p_max_w;
  const RateContext ctx(scen);

  Allocation alloc;
  alloc.b.resize(N, K);
  alloc.p.resize(N, K);
  ResourceOracleResult best;
  best.b = Eigen::VectorXd::Zero(K);
  best.p_w = Eigen::VectorXd::Zero(K);
  best.objective_bits = -std::numeric_limits<double>::infinity();

  for (int i = 0; i <= steps; ++i) {
    const double b1 = double(i) / steps;
    for (int j = 0; j <= steps; ++j) {
      const double p1 = double(j) / steps * P;
      for (int n = 0; n < N; ++n) {
        alloc.b(n, 0) = b1;
        alloc.p(n, 0) = p1;
        if (K == 2) {
          alloc.b(n, 1) = 1.0 - b1;
          alloc.p(n, 1) = P - p1;
        }
      }
      const double v = min_throughput_or_zero(ctx, eta, alloc, traj);
      if (v > best.objective_bits) {
        best.objective_bits = v;
        best.b[0] = b1;
        best.p_w[0] = p1;
        if (K == 2) {
          best.b[1] = 1.0 - b1;
          best.p_w[1] = P - p1;
        }
      }
    }
  }
  return best;
}

MonteCarloRate monte_carlo_rate(const Scenario& scen, double bandwidth_share,
                                double p_w, double dist_m, int samples,
                                std::uint64_t seed) {
  if (samples < 10000) {
    throw ValidationError("monte_carlo_rate: needs at least 1e4 samples, got " +
                          std::to_string(samples));
  }
  if (!(dist_m > 0.0)) {
    throw ValidationError("monte_carlo_rate: distance must be positive");
  }
  const double c = scen.radio.beta0 /
                   (std::pow(dist_m, scen.radio.alpha) * scen.access_noise_w());
  const double bw = bandwidth_share * scen.uav.access_bandwidth_hz;

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> h2(1.0);
  double mean = 0.0, m2 = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double r = bw * std::log2(1.0 + p_w * h2(rng) * c);
    const double d = r - mean;
    mean += d / i;
    m2 += d * (r - mean);
  }
  MonteCarloRate out;
  out.mean_bits_s = mean;
  out.stderr_bits_s =
      samples > 1 ? std::sqrt(m2 / (double(samples) - 1.0) / double(samples))
                  : 0.0;
  return out;
}

void export_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "scheme,param,value,min_tp_bits,total_tp_bits,iters,wall_s,seed,"
         "status\n";
  for (const ResultRow& r : rows) {
    out << r.scheme << ',' << r.param << ',' << num(r.value) << ','
        << num(r.min_tp_bits) << ',' << num(r.total_tp_bits) << ',' << r.iters
        << ',' << num(r.wall_s) << ',' << r.seed << ',' << r.status << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed for " + path);
}

void export_trajectory(const Scenario& scen, const Trajectory& traj,
                       const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create directory " + dir + ": " +
                             ec.message());
  }
  const std::string traj_path = dir + "/trajectory.csv";
  std::ofstream tf(traj_path);
  if (!tf) throw std::runtime_error("cannot write " + traj_path);
  tf << "slot,x_m,y_m\n";
  for (int n = 0; n < traj.q.rows(); ++n) {
    tf << n << ',' << num(traj.q(n, 0)) << ',' << num(traj.q(n, 1)) << '\n';
  }
  if (!tf.flush()) throw std::runtime_error("write failed for " + traj_path);

  const std::string users_path = dir + "/users.csv";
  std::ofstream uf(users_path);
  if (!uf) throw std::runtime_error("cannot write " + users_path);
  uf << "id,x_m,y_m,file\n";
  for (const GroundUser& u : scen.users) {
    uf << u.id << ',' << num(u.position.x()) << ',' << num(u.position.y())
       << ',' << u.requested_file << '\n';
  }
  if (!uf.flush()) throw std::runtime_error("write failed for " + users_path);
}

}  // namespace satuav
