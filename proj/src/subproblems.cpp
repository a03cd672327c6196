#include "satuav/subproblems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace satuav {

namespace {

constexpr double kLn2 = 0.69314718055994531;

double user_pop(const Scenario& s, int k) {
  return zipf_prob(s.users[k].requested_file, s.catalog.file_count,
                   s.catalog.zipf_exponent);
}

double user_eta(const Scenario& s, const CacheVector& eta, int k) {
  return eta.eta[s.users[k].requested_file - 1];
}

// done_slot per user from the incumbent state, clamped to the horizon so
// the tail window n > done never indexes past it. An undeliverable user
// keeps an empty tail, matching the lenient throughput accounting.
std::vector<int> frozen_done(const RateContext& ctx, const Iterate& cur) {
  const DeliverySchedule sched = delivery_schedule(ctx, cur.eta, cur.traj);
  const int N = ctx.scenario().slot_count;
  std::vector<int> done(sched.done_slot.size());
  for (size_t k = 0; k < done.size(); ++k) {
    done[k] = std::min(sched.done_slot[k], N);
  }
  return done;
}

// delta * pop_k * B2 * (eta_k + (1 - eta_k) * [n > done_k]), the bits per
// unit of spectral efficiency that slot n contributes to user k under the
// frozen delivery schedule.
double slot_weight(const Scenario& s, double eta_k, double pop_k, int n, int done_k) {
  const double tail = n > done_k ? 1.0 : 0.0;
  return s.slot_duration_s * pop_k * s.uav.access_bandwidth_hz *
         (eta_k + (1.0 - eta_k) * tail);
}

}  // namespace

double penalty_surrogate(double eta, double eta_prev, double kappa) {
  return kappa * (eta * (2.0 * eta_prev - 1.0) - eta_prev * eta_prev);
}

double theta_surrogate(double b, double phi, double b_prev, double phi_prev) {
  const double s0 = b_prev + phi_prev;
  const double d = b - phi;
  return 0.25 * s0 * s0 + 0.5 * s0 * ((b - b_prev) + (phi - phi_prev)) -
         0.25 * d * d;
}

double log_recip_lb(double nu, double nu_prev, double psi) {
  if (!(nu > 0.0) || !(nu_prev > 0.0)) {
    throw std::domain_error("log_recip_lb: nu and nu_prev must be positive");
  }
  return std::log2(1.0 + psi / nu_prev) -
         psi * (nu - nu_prev) / (nu_prev * (nu_prev + psi) * kLn2);
}

CacheStep solve_cache_placement(const Scenario& scen, const RateContext& ctx,
                                const Iterate& cur, double solver_tol) {
  const int K = scen.user_count();
  const int F = scen.catalog.file_count;
  const int S = scen.catalog.cache_capacity_files;
  const int N = scen.slot_count;
  const double Q = scen.catalog.file_size_bits;
  const double kappa = cur.kappa;

  CacheStep out;
  if (S == 0) {
    out.eta.eta = Eigen::VectorXd::Zero(F);
    out.chi = min_throughput_or_zero(ctx, out.eta, cur.alloc, cur.traj);
    return out;
  }

  const std::vector<int> done = frozen_done(ctx, cur);
  const std::vector<double> backhaul = ctx.backhaul_rates(cur.traj);

  // Per-user rate sums at the fixed allocation and trajectory. Throughput
  // is affine in the user's own cache share: base + gain * eta.
  Eigen::VectorXd base(K), gain(K);
  double chi_cap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    const Eigen::Vector2d w = scen.users[k].position;
    double sum_all = 0.0, sum_tail = 0.0;
    for (int n = 1; n <= N; ++n) {
      const double r = ctx.access_rate_lb(cur.alloc.b(n - 1, k),
                                          cur.alloc.p(n - 1, k), cur.traj.pos(n), w);
      sum_all += r;
      if (n > done[k]) sum_tail += r;
    }
    const double pop = user_pop(scen, k);
    base[k] = scen.slot_duration_s * pop * sum_tail;
    gain[k] = scen.slot_duration_s * pop * (sum_all - sum_tail);
    chi_cap = std::min(chi_cap, base[k] + gain[k]);
  }
  const double chi_scale = std::max(1.0, chi_cap);

  // Delivery room inside each user's frozen window: the non-cached share
  // must fit the backhaul bits available through slot done_k, which keeps
  // every candidate at least as early-delivered as the frozen schedule.
  Eigen::VectorXd eta_floor = Eigen::VectorXd::Zero(F);
  for (int k = 0; k < K; ++k) {
    double window_bits = 0.0;
    for (int n = 1; n <= done[k]; ++n) {
      window_bits += scen.slot_duration_s * backhaul[n - 1];
    }
    const double tau = 1.0 - window_bits / Q;
    const int f = scen.users[k].requested_file - 1;
    eta_floor[f] = std::max(eta_floor[f], tau);
  }

  // Files whose floor reaches 1 must be fully cached; fold them out.
  std::vector<char> pinned(F, 0);
  int pin_count = 0;
  for (int f = 0; f < F; ++f) {
    if (eta_floor[f] >= 1.0 - 1e-9) {
      pinned[f] = 1;
      ++pin_count;
    }
  }
  auto incumbent = [&](conic::SolveStatus st) {
    CacheStep keep;
    keep.eta = cur.eta;
    keep.chi = min_throughput_or_zero(ctx, cur.eta, cur.alloc, cur.traj);
    keep.status = st;
    return keep;
  };
  if (pin_count > S) return incumbent(conic::SolveStatus::infeasible);

  std::vector<int> var_of(F, -1);
  int nf = 0;
  for (int f = 0; f < F; ++f) {
    if (!pinned[f]) var_of[f] = nf++;
  }
  const int ix = nf;  // normalized epigraph variable

  conic::ConvexProgram lp;
  lp.resize(nf + 1);
  for (int f = 0; f < F; ++f) {
    if (pinned[f]) continue;
    const int v = var_of[f];
    lp.lower[v] = std::max(0.0, eta_floor[f]);
    lp.upper[v] = 1.0;
    lp.objective[v] = kappa * (2.0 * cur.eta.eta[f] - 1.0);
  }
  lp.lower[ix] = -0.25;
  lp.upper[ix] = 1.25;
  lp.objective[ix] = 1.0;

  for (int k = 0; k < K; ++k) {
    const int f = scen.users[k].requested_file - 1;
    conic::LinearConstraint epi;
    epi.lhs.add(ix, 1.0);
    epi.rhs = base[k] / chi_scale;
    if (pinned[f]) {
      epi.rhs += gain[k] / chi_scale;
    } else {
      epi.lhs.add(var_of[f], -gain[k] / chi_scale);
    }
    lp.add(epi, "user " + std::to_string(k) + " epigraph");
  }
  if (nf > 0) {
    conic::LinearConstraint cap;
    for (int f = 0; f < F; ++f) {
      if (!pinned[f]) cap.lhs.add(var_of[f], 1.0);
    }
    cap.rhs = static_cast<double>(S - pin_count);
    lp.add(cap, "cache capacity");
  }

  conic::SolverSettings lp_settings;
  lp_settings.tol = std::min(solver_tol, 1e-8);
  lp_settings.max_newton = 4000;
  const conic::SolveReport pass1 = conic::solve(lp, lp_settings);
  // A truncated solve still yields a strictly feasible point worth keeping;
  // only a proven-empty interior (or an infeasible iterate) falls back.
  if (pass1.status == conic::SolveStatus::infeasible || pass1.feas_residual > 0.0) {
    return incumbent(pass1.status);
  }
  out.status = pass1.status;

  auto scatter = [&](const Eigen::VectorXd& x) {
    CacheVector v;
    v.eta = Eigen::VectorXd::Zero(F);
    for (int f = 0; f < F; ++f) {
      v.eta[f] = pinned[f] ? 1.0 : std::clamp(x[var_of[f]], 0.0, 1.0);
    }
    return v;
  };
  const CacheVector eta1 = scatter(pass1.x);

  // Vertex-seeking pass: pin the epigraph just below its optimum, then
  // re-optimize the penalty with a small popularity-ordered perturbation so
  // the barrier cannot settle on the centre of a tied optimal face.
  conic::ConvexProgram lp2 = lp;
  lp2.objective[ix] = 0.0;
  for (int f = 0; f < F; ++f) {
    if (!pinned[f]) {
      lp2.objective[var_of[f]] += 1e-3 * static_cast<double>(F - f) / F;
    }
  }
  conic::LinearConstraint floor_row;
  floor_row.lhs.add(ix, -1.0);
  floor_row.rhs = -(pass1.x[ix] - 1e-7 * (1.0 + std::abs(pass1.x[ix])));
  lp2.add(floor_row, "epigraph floor");
  lp2.start_hint = pass1.x;
  const conic::SolveReport pass2 = conic::solve(lp2, lp_settings);
  const CacheVector eta2 = (pass2.status != conic::SolveStatus::infeasible &&
                            pass2.feas_residual == 0.0)
                               ? scatter(pass2.x)
                               : eta1;

  // Keep the second pass only when it costs no delivered throughput.
  const double v1 = min_throughput_or_zero(ctx, eta1, cur.alloc, cur.traj);
  const double v2 = min_throughput_or_zero(ctx, eta2, cur.alloc, cur.traj);
  out.eta = v2 >= v1 ? eta2 : eta1;

  double chi = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    chi = std::min(chi, base[k] + gain[k] * user_eta(scen, out.eta, k));
  }
  out.chi = chi;
  return out;
}

ResourceStep solve_resource_allocation(const Scenario& scen, const RateContext& ctx,
                                       const Iterate& cur, double solver_tol) {
  const int K = scen.user_count();
  const int N = scen.slot_count;
  const double P = scen.uav.p_max_w;

  const std::vector<int> done = frozen_done(ctx, cur);
  Eigen::VectorXd pop(K), eta_k(K);
  for (int k = 0; k < K; ++k) {
    pop[k] = user_pop(scen, k);
    eta_k[k] = std::clamp(user_eta(scen, cur.eta, k), 0.0, 1.0);
  }

  // Per-pair SNR slope s = c * P_max so the power variable is the budget
  // fraction p' = p / P_max and phi <= log2(1 + s * p').
  Eigen::MatrixXd w(N, K), s(N, K), phi0(N, K);
  double chi_cap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    const Eigen::Vector2d wk = scen.users[k].position;
    double cap_k = 0.0;
    for (int n = 1; n <= N; ++n) {
      const double d2 = scen.uav.altitude_m * scen.uav.altitude_m +
                        (cur.traj.pos(n) - wk).squaredNorm();
      s(n - 1, k) = P > 0.0 ? ctx.access_psi(P) / d2 : 0.0;
      w(n - 1, k) = slot_weight(scen, eta_k[k], pop[k], n, done[k]);
      const double pfrac =
          P > 0.0 ? std::clamp(cur.alloc.p(n - 1, k) / P, 0.0, 1.0) : 0.0;
      phi0(n - 1, k) = std::log2(1.0 + s(n - 1, k) * pfrac);
      cap_k += w(n - 1, k) * std::log2(1.0 + s(n - 1, k));
    }
    chi_cap = std::min(chi_cap, cap_k);
  }

  ResourceStep out;
  if (!(chi_cap > 0.0)) {
    // Some user can receive nothing whatever the split (for instance a zero
    // power budget): the min objective is pinned at zero and the incumbent
    // allocation is as good as any other.
    out.alloc = cur.alloc;
    out.phi = Eigen::MatrixXd::Zero(N, K);
    out.chi = 0.0;
    return out;
  }
  const double chi_scale = std::max(1.0, chi_cap);

  const int nb = 0;            // bandwidth shares
  const int np = N * K;        // power fractions
  const int nphi = 2 * N * K;  // spectral efficiencies
  const int ix = 3 * N * K;    // normalized epigraph variable
  auto id = [K](int n, int k) { return (n - 1) * K + k; };  // n is 1-based

  conic::ConvexProgram prog;
  prog.resize(3 * N * K + 1);
  for (int n = 1; n <= N; ++n) {
    for (int k = 0; k < K; ++k) {
      const int j = id(n, k);
      prog.lower[nb + j] = 0.0;
      prog.upper[nb + j] = 1.0;
      prog.lower[np + j] = 0.0;
      prog.upper[np + j] = 1.0;
      prog.lower[nphi + j] = 0.0;
      prog.upper[nphi + j] = std::log2(1.0 + s(n - 1, k)) + 1.0;
    }
  }
  prog.lower[ix] = -0.25;
  prog.upper[ix] = 1.25;
  prog.objective[ix] = 1.0;

  // chi' <= sum_n w * Theta(b, phi) around the incumbent, written as a
  // convex quadratic row block; exact at (b0, phi0) where Theta = b0*phi0.
  for (int k = 0; k < K; ++k) {
    conic::QuadraticConstraint epi;
    epi.lin.add(ix, 1.0);
    double rhs = 0.0;
    for (int n = 1; n <= N; ++n) {
      const double wn = w(n - 1, k) / chi_scale;
      if (wn <= 0.0) continue;
      const double s0 = cur.alloc.b(n - 1, k) + phi0(n - 1, k);
      epi.lin.add(nb + id(n, k), -0.5 * wn * s0);
      epi.lin.add(nphi + id(n, k), -0.5 * wn * s0);
      conic::AffineExpr row;
      const double h = 0.5 * std::sqrt(wn);
      row.add(nb + id(n, k), h);
      row.add(nphi + id(n, k), -h);
      epi.rows.push_back(row);
      rhs -= 0.25 * wn * s0 * s0;
    }
    epi.rhs = rhs;
    prog.add(epi, "user " + std::to_string(k) + " epigraph");
  }
  for (int n = 1; n <= N; ++n) {
    conic::LinearConstraint bsum, psum;
    for (int k = 0; k < K; ++k) {
      bsum.lhs.add(nb + id(n, k), 1.0);
      psum.lhs.add(np + id(n, k), 1.0);
    }
    bsum.rhs = 1.0;
    psum.rhs = 1.0;
    prog.add(bsum, "slot " + std::to_string(n) + " bandwidth");
    prog.add(psum, "slot " + std::to_string(n) + " power");
  }
  for (int n = 1; n <= N; ++n) {
    for (int k = 0; k < K; ++k) {
      conic::LogConstraint link;
      link.t = nphi + id(n, k);
      link.xi = np + id(n, k);
      link.w = 1.0;
      link.s = s(n - 1, k);
      prog.add(link, "rate link " + std::to_string(n) + "," + std::to_string(k));
    }
  }

  // Strictly interior start: shrink the incumbent toward a centred split,
  // then place phi and chi safely below their couplings.
  Eigen::VectorXd hint = Eigen::VectorXd::Zero(prog.n);
  const double pull = 1e-3;
  for (int n = 1; n <= N; ++n) {
    for (int k = 0; k < K; ++k) {
      const int j = id(n, k);
      hint[nb + j] = (1.0 - pull) * cur.alloc.b(n - 1, k) + pull / (2.0 * K);
      const double pfrac = std::clamp(cur.alloc.p(n - 1, k) / P, 0.0, 1.0);
      hint[np + j] = (1.0 - pull) * pfrac + pull / (2.0 * K);
      hint[nphi + j] =
          (1.0 - 1e-3) * std::log2(1.0 + s(n - 1, k) * hint[np + j]);
    }
  }
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    double tk = 0.0;
    for (int n = 1; n <= N; ++n) {
      const double wn = w(n - 1, k) / chi_scale;
      if (wn <= 0.0) continue;
      tk += wn * theta_surrogate(hint[nb + id(n, k)], hint[nphi + id(n, k)],
                                 cur.alloc.b(n - 1, k), phi0(n - 1, k));
    }
    worst = std::min(worst, tk);
  }
  hint[ix] = std::max(-0.2, worst - std::max(1e-4, 1e-3 * std::abs(worst)));
  prog.start_hint = hint;

  conic::SolverSettings settings;
  settings.tol = solver_tol;
  settings.max_newton = 4000;
  const conic::SolveReport rep = conic::solve(prog, settings);
  out.status = rep.status;
  if (rep.status == conic::SolveStatus::infeasible || rep.feas_residual > 0.0) {
    out.alloc = cur.alloc;
    out.phi = phi0;
    out.chi = 0.0;
    return out;
  }
  out.alloc.b.resize(N, K);
  out.alloc.p.resize(N, K);
  out.phi.resize(N, K);
  for (int n = 1; n <= N; ++n) {
    for (int k = 0; k < K; ++k) {
      const int j = id(n, k);
      out.alloc.b(n - 1, k) = std::clamp(rep.x[nb + j], 0.0, 1.0);
      out.alloc.p(n - 1, k) = std::clamp(rep.x[np + j], 0.0, 1.0) * P;
      out.phi(n - 1, k) = rep.x[nphi + j];
    }
  }
  out.chi = rep.x[ix] * chi_scale;
  return out;
}

TrajectoryStep solve_trajectory(const Scenario& scen, const RateContext& ctx,
                                const Iterate& cur, double solver_tol) {
  const int K = scen.user_count();
  const int N = scen.slot_count;
  const double H2 = scen.uav.altitude_m * scen.uav.altitude_m;
  const double step_m = scen.uav.v_max_mps * scen.slot_duration_s;

  const std::vector<int> done = frozen_done(ctx, cur);

  // Length scale keeping waypoint coordinates and squared ranges O(1).
  double L = std::max({scen.area_side_m, scen.uav.altitude_m, 1.0,
                       scen.uav.start.lpNorm<Eigen::Infinity>(),
                       scen.uav.end.lpNorm<Eigen::Infinity>()});
  for (const GroundUser& u : scen.users) {
    L = std::max(L, u.position.lpNorm<Eigen::Infinity>());
  }
  const double L2 = L * L;
  const double h2n = H2 / L2;

  auto fill_nu = [&](const Trajectory& traj) {
    Eigen::MatrixXd nu(N, K);
    for (int n = 1; n <= N; ++n) {
      for (int k = 0; k < K; ++k) {
        nu(n - 1, k) = H2 + (traj.pos(n) - scen.users[k].position).squaredNorm();
      }
    }
    return nu;
  };

  // Weights fold the fixed bandwidth share in; psi' and nu' live in units
  // of L^2 so the log arguments are unchanged by the rescaling.
  Eigen::MatrixXd a(N, K), psi(N, K), nu0(N, K);
  double chi_cap = std::numeric_limits<double>::infinity();
  double chi_base = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    const Eigen::Vector2d wk = scen.users[k].position;
    const double pk = user_pop(scen, k);
    const double ek = std::clamp(user_eta(scen, cur.eta, k), 0.0, 1.0);
    double cap_k = 0.0, base_k = 0.0;
    for (int n = 1; n <= N; ++n) {
      a(n - 1, k) = slot_weight(scen, ek, pk, n, done[k]) * cur.alloc.b(n - 1, k);
      psi(n - 1, k) = ctx.access_psi(cur.alloc.p(n - 1, k)) / L2;
      nu0(n - 1, k) = (H2 + (cur.traj.pos(n) - wk).squaredNorm()) / L2;
      cap_k += a(n - 1, k) * std::log2(1.0 + psi(n - 1, k) / h2n);
      base_k += a(n - 1, k) * std::log2(1.0 + psi(n - 1, k) / nu0(n - 1, k));
    }
    chi_cap = std::min(chi_cap, cap_k);
    chi_base = std::min(chi_base, base_k);
  }

  TrajectoryStep out;
  const double chord = (scen.uav.end - scen.uav.start).norm();
  const bool tight = N * step_m - chord <= 1e-6 * std::max(1.0, N * step_m);
  if (N == 1 || tight || !(chi_cap > 0.0)) {
    // No freedom (single slot or a taut mission) or no user can ever see a
    // positive rate; the incumbent path is as good as any.
    out.traj = cur.traj;
    out.nu = fill_nu(cur.traj);
    out.chi = std::max(0.0, std::min(chi_base, chi_cap));
    return out;
  }
  const double chi_scale = std::max(1.0, chi_cap);

  // Variables: free waypoints q_1..q_{N-1} (x then y per slot), one nu per
  // pair whose epigraph coefficient is material, then chi.
  const int nq = 2 * (N - 1);
  Eigen::MatrixXi nu_var = Eigen::MatrixXi::Constant(N, K, -1);
  int nnu = 0;
  for (int n = 1; n <= N - 1; ++n) {
    for (int k = 0; k < K; ++k) {
      const double g = a(n - 1, k) * psi(n - 1, k) /
                       (nu0(n - 1, k) * (nu0(n - 1, k) + psi(n - 1, k)) * kLn2) /
                       chi_scale;
      if (g > 1e-12) nu_var(n - 1, k) = nq + nnu++;
    }
  }
  const int ix = nq + nnu;

  auto qx = [](int n) { return 2 * (n - 1); };  // waypoint n in 1..N-1
  auto qy = [](int n) { return 2 * (n - 1) + 1; };

  // Any reachable waypoint stays within this radius of the origin; the nu
  // ceiling must clear the farthest box corner so interior hints exist.
  const double reach_m =
      std::max(scen.uav.start.norm(), scen.uav.end.norm()) + N * step_m;
  double wmax_m = 0.0;
  for (const GroundUser& u : scen.users) wmax_m = std::max(wmax_m, u.position.norm());
  const double span = (std::sqrt(2.0) * 1.01 * reach_m + wmax_m) / L;
  const double nu_hi = 1.01 * (h2n + span * span) + 1e-6;

  conic::ConvexProgram prog;
  prog.resize(ix + 1);
  prog.objective[ix] = 1.0;
  for (int n = 1; n <= N - 1; ++n) {
    prog.lower[qx(n)] = prog.lower[qy(n)] = -1.01 * reach_m / L;
    prog.upper[qx(n)] = prog.upper[qy(n)] = 1.01 * reach_m / L;
  }
  for (int n = 1; n <= N - 1; ++n) {
    for (int k = 0; k < K; ++k) {
      if (nu_var(n - 1, k) < 0) continue;
      prog.lower[nu_var(n - 1, k)] = 0.999 * h2n;
      prog.upper[nu_var(n - 1, k)] = nu_hi;
    }
  }
  prog.lower[ix] = -0.25;
  prog.upper[ix] = 1.25;

  // chi' <= sum_n a * [log2(1 + psi/nu0) - G (nu - nu0)]; pairs without a
  // nu variable (fixed endpoint slot or an immaterial coefficient) keep
  // their frozen rate on the right-hand side.
  for (int k = 0; k < K; ++k) {
    conic::LinearConstraint epi;
    epi.lhs.add(ix, 1.0);
    double rhs = 0.0;
    for (int n = 1; n <= N; ++n) {
      const double an = a(n - 1, k);
      if (an <= 0.0) continue;
      const double c0 = std::log2(1.0 + psi(n - 1, k) / nu0(n - 1, k));
      const int v = n <= N - 1 ? nu_var(n - 1, k) : -1;
      if (v < 0) {
        rhs += an * c0 / chi_scale;
        continue;
      }
      const double g = an * psi(n - 1, k) /
                       (nu0(n - 1, k) * (nu0(n - 1, k) + psi(n - 1, k)) * kLn2) /
                       chi_scale;
      epi.lhs.add(v, g);
      rhs += an * c0 / chi_scale + g * nu0(n - 1, k);
    }
    epi.rhs = rhs;
    prog.add(epi, "user " + std::to_string(k) + " epigraph");
  }

  for (int n = 1; n <= N - 1; ++n) {
    for (int k = 0; k < K; ++k) {
      const int v = nu_var(n - 1, k);
      if (v < 0) continue;
      const Eigen::Vector2d wn = scen.users[k].position / L;
      conic::QuadraticConstraint range;
      conic::AffineExpr rx, ry;
      rx.add(qx(n), 1.0);
      rx.offset = -wn.x();
      ry.add(qy(n), 1.0);
      ry.offset = -wn.y();
      range.rows.push_back(rx);
      range.rows.push_back(ry);
      range.lin.add(v, -1.0);
      range.rhs = -h2n;
      prog.add(range, "range " + std::to_string(n) + "," + std::to_string(k));
    }
  }

  const Eigen::Vector2d q0 = scen.uav.start / L;
  const Eigen::Vector2d qN = scen.uav.end / L;
  for (int n = 1; n <= N; ++n) {
    conic::SocConstraint leg;
    conic::AffineExpr lx, ly;
    if (n == 1) {
      lx.add(qx(1), 1.0);
      lx.offset = -q0.x();
      ly.add(qy(1), 1.0);
      ly.offset = -q0.y();
    } else if (n == N) {
      lx.add(qx(N - 1), -1.0);
      lx.offset = qN.x();
      ly.add(qy(N - 1), -1.0);
      ly.offset = qN.y();
    } else {
      lx.add(qx(n), 1.0);
      lx.add(qx(n - 1), -1.0);
      ly.add(qy(n), 1.0);
      ly.add(qy(n - 1), -1.0);
    }
    leg.rows.push_back(lx);
    leg.rows.push_back(ly);
    leg.rhs.offset = step_m / L;
    prog.add(leg, "leg " + std::to_string(n));
  }

  // Strictly interior start: nudge the incumbent toward the straight chord
  // (whose legs sit inside the speed bound whenever any slack exists), then
  // lift nu and drop chi clear of their couplings.
  Eigen::VectorXd hint = Eigen::VectorXd::Zero(prog.n);
  for (int n = 1; n <= N - 1; ++n) {
    const Eigen::Vector2d chord_n =
        scen.uav.start + (scen.uav.end - scen.uav.start) * (double(n) / N);
    const Eigen::Vector2d qh =
        ((1.0 - 1e-4) * cur.traj.pos(n) + 1e-4 * chord_n) / L;
    hint[qx(n)] = qh.x();
    hint[qy(n)] = qh.y();
  }
  for (int n = 1; n <= N - 1; ++n) {
    for (int k = 0; k < K; ++k) {
      const int v = nu_var(n - 1, k);
      if (v < 0) continue;
      const Eigen::Vector2d wn = scen.users[k].position / L;
      const double quad =
          h2n + (Eigen::Vector2d(hint[qx(n)], hint[qy(n)]) - wn).squaredNorm();
      hint[v] = quad * (1.0 + 1e-4) + 1e-6;
    }
  }
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    const auto& epi = std::get<conic::LinearConstraint>(prog.constraints[k]);
    double lhs = 0.0;
    for (size_t j = 0; j < epi.lhs.idx.size(); ++j) {
      if (epi.lhs.idx[j] != ix) lhs += epi.lhs.coef[j] * hint[epi.lhs.idx[j]];
    }
    worst = std::min(worst, epi.rhs - lhs);
  }
  hint[ix] = std::max(-0.2, worst - std::max(1e-4, 1e-3 * std::abs(worst)));
  prog.start_hint = hint;

  conic::SolverSettings settings;
  settings.tol = solver_tol;
  settings.max_newton = 4000;
  const conic::SolveReport rep = conic::solve(prog, settings);
  out.status = rep.status;
  if (rep.status == conic::SolveStatus::infeasible || rep.feas_residual > 0.0) {
    out.traj = cur.traj;
    out.nu = fill_nu(cur.traj);
    out.chi = std::max(0.0, chi_base);
    return out;
  }
  out.traj.q.resize(N + 1, 2);
  out.traj.q.row(0) = scen.uav.start.transpose();
  out.traj.q.row(N) = scen.uav.end.transpose();
  for (int n = 1; n <= N - 1; ++n) {
    out.traj.q(n, 0) = rep.x[qx(n)] * L;
    out.traj.q(n, 1) = rep.x[qy(n)] * L;
  }
  out.nu = fill_nu(out.traj);
  out.chi = rep.x[ix] * chi_scale;
  return out;
}

}  // namespace satuav
