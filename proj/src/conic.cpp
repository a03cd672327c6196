#include "satuav/conic.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace satuav::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.69314718055994531;

double sqr(double v) { return v * v; }

// Residual r(x), feasible iff r <= 0; +inf outside a log/soc domain.
double residual_of(const Constraint& c, const Eigen::VectorXd& x) {
  if (const auto* l = std::get_if<LinearConstraint>(&c)) {
    return l->lhs.eval(x) - l->rhs;
  }
  if (const auto* q = std::get_if<QuadraticConstraint>(&c)) {
    double v = q->lin.eval(x) - q->rhs;
    for (const auto& row : q->rows) v += sqr(row.eval(x));
    return v;
  }
  if (const auto* s = std::get_if<SocConstraint>(&c)) {
    double zz = 0.0;
    for (const auto& row : s->rows) zz += sqr(row.eval(x));
    return std::sqrt(zz) - s->rhs.eval(x);
  }
  const auto& lg = std::get<LogConstraint>(c);
  const double a = 1.0 + lg.s * x[lg.xi];
  if (!(a > 0.0)) return kInf;
  double r = x[lg.t] - lg.w * std::log2(a);
  if (lg.slack >= 0) r -= x[lg.slack];
  return r;
}

void check_expr(const AffineExpr& e, int n, const std::string& what) {
  if (e.idx.size() != e.coef.size()) {
    throw ValidationError(what + ": index/coefficient length mismatch");
  }
  for (int i : e.idx) {
    if (i < 0 || i >= n) {
      throw ValidationError(what + ": variable index " + std::to_string(i) +
                            " outside [0," + std::to_string(n) + ")");
    }
  }
}

}  // namespace

void ConvexProgram::resize(int vars) {
  n = vars;
  objective = Eigen::VectorXd::Zero(n);
  lower = Eigen::VectorXd::Constant(n, -kInf);
  upper = Eigen::VectorXd::Constant(n, kInf);
}

int ConvexProgram::add(Constraint c, std::string label) {
  constraints.push_back(std::move(c));
  labels.push_back(std::move(label));
  return static_cast<int>(constraints.size()) - 1;
}

std::string ConvexProgram::label_of(int i) const {
  if (i >= 0 && i < static_cast<int>(labels.size()) && !labels[i].empty()) {
    return labels[i];
  }
  return "constraint " + std::to_string(i);
}

void ConvexProgram::validate() const {
  if (n < 1) throw ValidationError("program has no variables");
  if (objective.size() != n || lower.size() != n || upper.size() != n) {
    throw ValidationError("objective/bounds sizes do not match variable count");
  }
  if (start_hint.size() != 0 && start_hint.size() != n) {
    throw ValidationError("start hint size does not match variable count");
  }
  if (!labels.empty() && labels.size() != constraints.size()) {
    throw ValidationError("label list must be empty or match the constraint list");
  }
  for (int j = 0; j < n; ++j) {
    if (!(lower[j] < upper[j])) {
      throw ValidationError("variable " + std::to_string(j) +
                            " has an empty or degenerate box");
    }
  }
  for (size_t i = 0; i < constraints.size(); ++i) {
    const std::string what = label_of(static_cast<int>(i));
    const Constraint& c = constraints[i];
    if (const auto* l = std::get_if<LinearConstraint>(&c)) {
      check_expr(l->lhs, n, what);
      if (l->lhs.idx.empty()) throw ValidationError(what + ": empty linear constraint");
    } else if (const auto* q = std::get_if<QuadraticConstraint>(&c)) {
      for (const auto& row : q->rows) check_expr(row, n, what);
      check_expr(q->lin, n, what);
      if (q->rows.empty() && q->lin.idx.empty()) {
        throw ValidationError(what + ": empty quadratic constraint");
      }
    } else if (const auto* s = std::get_if<SocConstraint>(&c)) {
      for (const auto& row : s->rows) check_expr(row, n, what);
      check_expr(s->rhs, n, what);
      if (s->rows.empty()) throw ValidationError(what + ": cone without rows");
    } else {
      const auto& lg = std::get<LogConstraint>(c);
      if (lg.t < 0 || lg.t >= n || lg.xi < 0 || lg.xi >= n ||
          (lg.slack >= 0 && lg.slack >= n)) {
        throw ValidationError(what + ": log constraint index out of range");
      }
      if (!(lg.w > 0) || !(lg.s > 0)) {
        throw ValidationError(what + ": log constraint needs positive w and s");
      }
      if (!(lower[lg.xi] >= 0)) {
        throw ValidationError(what + ": log argument needs a non-negative lower bound");
      }
    }
  }
}

Feasibility check_feasible(const ConvexProgram& prog, const Eigen::VectorXd& x,
                           double tol) {
  Feasibility out;
  out.worst_residual = -kInf;
  for (size_t i = 0; i < prog.constraints.size(); ++i) {
    const double r = residual_of(prog.constraints[i], x);
    if (r > out.worst_residual) {
      out.worst_residual = r;
      out.worst_constraint = static_cast<int>(i);
      out.worst_variable = -1;
    }
  }
  for (int j = 0; j < prog.n; ++j) {
    const double r = std::max(prog.lower[j] - x[j], x[j] - prog.upper[j]);
    if (r > out.worst_residual) {
      out.worst_residual = r;
      out.worst_constraint = -1;
      out.worst_variable = j;
    }
  }
  if (out.worst_residual == -kInf) out.worst_residual = 0.0;
  out.feasible = out.worst_residual <= tol;
  return out;
}

namespace {

struct Compiled {
  std::vector<std::vector<int>> support;  // gradient support per constraint
  std::vector<char> global;               // low-rank gradient handling
  int n_global = 0;
  int m_terms = 0;  // barrier terms: constraints + finite box bounds
};

std::vector<int> support_of(const Constraint& c) {
  std::vector<int> s;
  auto take = [&s](const AffineExpr& e) {
    s.insert(s.end(), e.idx.begin(), e.idx.end());
  };
  if (const auto* l = std::get_if<LinearConstraint>(&c)) {
    take(l->lhs);
  } else if (const auto* q = std::get_if<QuadraticConstraint>(&c)) {
    for (const auto& row : q->rows) take(row);
    take(q->lin);
  } else if (const auto* sc = std::get_if<SocConstraint>(&c)) {
    for (const auto& row : sc->rows) take(row);
    take(sc->rhs);
  } else {
    const auto& lg = std::get<LogConstraint>(c);
    s.push_back(lg.t);
    s.push_back(lg.xi);
    if (lg.slack >= 0) s.push_back(lg.slack);
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

Compiled compile(const ConvexProgram& p, const SolverSettings& st) {
  Compiled c;
  c.support.reserve(p.constraints.size());
  c.global.reserve(p.constraints.size());
  for (const Constraint& con : p.constraints) {
    c.support.push_back(support_of(con));
    // Only affine gradients are split off low-rank; cone and log barriers
    // carry indefinite pieces that must stay inside the sparse factor.
    const bool wide =
        static_cast<int>(c.support.back().size()) > st.local_support_max;
    const bool splittable = std::holds_alternative<LinearConstraint>(con) ||
                            std::holds_alternative<QuadraticConstraint>(con);
    c.global.push_back(wide && splittable ? 1 : 0);
    if (c.global.back()) ++c.n_global;
  }
  c.m_terms = static_cast<int>(p.constraints.size());
  for (int j = 0; j < p.n; ++j) {
    if (std::isfinite(p.lower[j])) ++c.m_terms;
    if (std::isfinite(p.upper[j])) ++c.m_terms;
  }
  return c;
}

// Barrier value at x; false when x is outside the strict domain.
bool barrier_phi(const ConvexProgram& p, const Eigen::VectorXd& x, double& phi) {
  phi = 0.0;
  for (const Constraint& c : p.constraints) {
    if (const auto* s = std::get_if<SocConstraint>(&c)) {
      const double u = s->rhs.eval(x);
      if (!(u > 0.0)) return false;
      double zz = 0.0;
      for (const auto& row : s->rows) zz += sqr(row.eval(x));
      const double g = u * u - zz;
      if (!(g > 0.0)) return false;
      phi -= std::log(g);
      continue;
    }
    const double r = residual_of(c, x);
    if (!(r < 0.0)) return false;
    phi -= std::log(-r);
  }
  for (int j = 0; j < p.n; ++j) {
    if (std::isfinite(p.lower[j])) {
      const double d = x[j] - p.lower[j];
      if (!(d > 0.0)) return false;
      phi -= std::log(d);
    }
    if (std::isfinite(p.upper[j])) {
      const double d = p.upper[j] - x[j];
      if (!(d > 0.0)) return false;
      phi -= std::log(d);
    }
  }
  return true;
}

// Gradient, sparse Hessian triplets (local part D) and low-rank columns U
// of the barrier at x. The full Hessian is D + U*U^T. Returns the barrier
// value as well. x must be strictly inside the domain.
double barrier_derivs(const ConvexProgram& p, const Compiled& c,
                      const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                      std::vector<Eigen::Triplet<double>>& trips,
                      Eigen::MatrixXd& U, Eigen::VectorXd& scratch) {
  const int n = p.n;
  grad.setZero();
  trips.clear();
  if (U.cols() > 0) U.setZero();
  double phi = 0.0;
  int ucol = 0;

  for (size_t i = 0; i < p.constraints.size(); ++i) {
    const Constraint& con = p.constraints[i];
    const std::vector<int>& sup = c.support[i];

    if (const auto* l = std::get_if<LinearConstraint>(&con)) {
      const double r = l->lhs.eval(x) - l->rhs;
      phi -= std::log(-r);
      const double winv = -1.0 / r;  // > 0
      const auto& idx = l->lhs.idx;
      const auto& cf = l->lhs.coef;
      for (size_t j = 0; j < idx.size(); ++j) grad[idx[j]] += winv * cf[j];
      if (c.global[i]) {
        for (size_t j = 0; j < idx.size(); ++j) U(idx[j], ucol) += winv * cf[j];
        ++ucol;
      } else {
        for (size_t j = 0; j < idx.size(); ++j) {
          for (size_t k = 0; k < idx.size(); ++k) {
            trips.emplace_back(idx[j], idx[k], winv * winv * cf[j] * cf[k]);
          }
        }
      }
      continue;
    }

    if (const auto* q = std::get_if<QuadraticConstraint>(&con)) {
      double r = q->lin.eval(x) - q->rhs;
      for (const auto& row : q->rows) r += sqr(row.eval(x));
      phi -= std::log(-r);
      const double winv = -1.0 / r;
      // grad r accumulated over the support into scratch
      for (const auto& row : q->rows) {
        const double v = row.eval(x);
        for (size_t j = 0; j < row.idx.size(); ++j) {
          scratch[row.idx[j]] += 2.0 * v * row.coef[j];
        }
        // curvature 2 a a^T, weighted by winv
        for (size_t j = 0; j < row.idx.size(); ++j) {
          for (size_t k = 0; k < row.idx.size(); ++k) {
            trips.emplace_back(row.idx[j], row.idx[k],
                               2.0 * winv * row.coef[j] * row.coef[k]);
          }
        }
      }
      for (size_t j = 0; j < q->lin.idx.size(); ++j) {
        scratch[q->lin.idx[j]] += q->lin.coef[j];
      }
      for (int v : sup) grad[v] += winv * scratch[v];
      if (c.global[i]) {
        for (int v : sup) U(v, ucol) = winv * scratch[v];
        ++ucol;
      } else {
        for (int a : sup) {
          for (int b : sup) {
            trips.emplace_back(a, b, winv * winv * scratch[a] * scratch[b]);
          }
        }
      }
      for (int v : sup) scratch[v] = 0.0;
      continue;
    }

    if (const auto* s = std::get_if<SocConstraint>(&con)) {
      const double u = s->rhs.eval(x);
      double zz = 0.0;
      for (const auto& row : s->rows) zz += sqr(row.eval(x));
      const double g = u * u - zz;
      phi -= std::log(g);
      // grad g into scratch
      for (size_t j = 0; j < s->rhs.idx.size(); ++j) {
        scratch[s->rhs.idx[j]] += 2.0 * u * s->rhs.coef[j];
      }
      for (const auto& row : s->rows) {
        const double v = row.eval(x);
        for (size_t j = 0; j < row.idx.size(); ++j) {
          scratch[row.idx[j]] -= 2.0 * v * row.coef[j];
        }
      }
      for (int v : sup) grad[v] -= scratch[v] / g;
      // Hessian: grad g grad g^T / g^2 - (2 c c^T - 2 sum a a^T) / g
      for (int a : sup) {
        for (int b : sup) {
          trips.emplace_back(a, b, scratch[a] * scratch[b] / (g * g));
        }
      }
      for (size_t j = 0; j < s->rhs.idx.size(); ++j) {
        for (size_t k = 0; k < s->rhs.idx.size(); ++k) {
          trips.emplace_back(s->rhs.idx[j], s->rhs.idx[k],
                             -2.0 / g * s->rhs.coef[j] * s->rhs.coef[k]);
        }
      }
      for (const auto& row : s->rows) {
        for (size_t j = 0; j < row.idx.size(); ++j) {
          for (size_t k = 0; k < row.idx.size(); ++k) {
            trips.emplace_back(row.idx[j], row.idx[k],
                               2.0 / g * row.coef[j] * row.coef[k]);
          }
        }
      }
      for (int v : sup) scratch[v] = 0.0;
      continue;
    }

    const auto& lg = std::get<LogConstraint>(con);
    const double a = 1.0 + lg.s * x[lg.xi];
    double r = x[lg.t] - lg.w * std::log2(a);
    if (lg.slack >= 0) r -= x[lg.slack];
    phi -= std::log(-r);
    const double winv = -1.0 / r;
    const double gx = lg.w * lg.s / (a * kLn2);        // -d r / d xi
    const double hx = lg.w * lg.s * lg.s / (a * a * kLn2);  // d2 r / d xi2
    grad[lg.t] += winv;
    grad[lg.xi] -= winv * gx;
    const double w1 = winv * winv;
    trips.emplace_back(lg.t, lg.t, w1);
    trips.emplace_back(lg.t, lg.xi, -w1 * gx);
    trips.emplace_back(lg.xi, lg.t, -w1 * gx);
    trips.emplace_back(lg.xi, lg.xi, w1 * gx * gx + winv * hx);
    if (lg.slack >= 0) {
      grad[lg.slack] -= winv;
      trips.emplace_back(lg.slack, lg.slack, w1);
      trips.emplace_back(lg.slack, lg.t, -w1);
      trips.emplace_back(lg.t, lg.slack, -w1);
      trips.emplace_back(lg.slack, lg.xi, w1 * gx);
      trips.emplace_back(lg.xi, lg.slack, w1 * gx);
    }
  }

  for (int j = 0; j < n; ++j) {
    if (std::isfinite(p.lower[j])) {
      const double d = x[j] - p.lower[j];
      phi -= std::log(d);
      grad[j] -= 1.0 / d;
      trips.emplace_back(j, j, 1.0 / (d * d));
    }
    if (std::isfinite(p.upper[j])) {
      const double d = p.upper[j] - x[j];
      phi -= std::log(d);
      grad[j] += 1.0 / d;
      trips.emplace_back(j, j, 1.0 / (d * d));
    }
  }
  // Structural diagonal, also the slot where a stabilizing ridge lands.
  for (int j = 0; j < n; ++j) trips.emplace_back(j, j, 0.0);
  return phi;
}

struct PathOutcome {
  Eigen::VectorXd x;
  double t_bar = 1.0;
  int newton = 0;
  bool centered = false;
  bool budget_out = false;
  bool gap_reached = false;
  bool stopped_early = false;
};

// Follows the central path for "maximize obj . x" from a strictly feasible
// start. stop_early, when provided, is polled between Newton steps.
PathOutcome follow_path(const ConvexProgram& p, const Compiled& c,
                        Eigen::VectorXd x, const SolverSettings& st,
                        int budget,
                        const std::function<bool(const Eigen::VectorXd&)>& stop_early) {
  const int n = p.n;
  PathOutcome out;
  Eigen::VectorXd grad(n), gtot(n), scratch = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd U(n, c.n_global);
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::SparseMatrix<double> D(n, n);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;

  double t = 1.0;
  double lambda2 = kInf;

  // Every accepted iterate is strictly feasible, so the best-objective one
  // seen is a valid fallback when the path cannot be certified to tolerance.
  Eigen::VectorXd best_x = x;
  double best_obj = p.objective.dot(x);

  for (int stage = 0; stage < 64; ++stage) {
    for (int it = 0; it < 100; ++it) {
      if (out.newton >= budget) {
        out.x = best_obj > p.objective.dot(x) ? best_x : x;
        out.t_bar = t;
        out.budget_out = true;
        return out;
      }
      if (stop_early && stop_early(x)) {
        out.x = x;
        out.t_bar = t;
        out.stopped_early = true;
        out.centered = true;
        return out;
      }
      const double phi0 = barrier_derivs(p, c, x, grad, trips, U, scratch);
      gtot = grad - t * p.objective;

      // Assemble, factor and solve, bumping the diagonal ridge whenever the
      // factorization breaks down or yields a non-finite step.
      double ridge = 0.0;
      bool solved = false;
      Eigen::VectorXd dx;
      for (int attempt = 0; attempt < 8; ++attempt) {
        if (ridge > 0.0) {
          for (int j = 0; j < n; ++j) {
            trips[trips.size() - n + j] = {j, j, ridge};
          }
        }
        D.setFromTriplets(trips.begin(), trips.end());
        if (!analyzed) {
          ldlt.analyzePattern(D);
          analyzed = true;
        }
        ldlt.factorize(D);
        if (ldlt.info() == Eigen::Success) {
          Eigen::MatrixXd ZU;
          Eigen::LLT<Eigen::MatrixXd> Sllt;
          if (c.n_global > 0) {
            ZU = ldlt.solve(U);
            Eigen::MatrixXd S = U.transpose() * ZU;
            S.diagonal().array() += 1.0;
            Sllt.compute(S);
          }
          const auto solve_h = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
            if (c.n_global == 0) return ldlt.solve(b);
            const Eigen::VectorXd z = ldlt.solve(b);
            return z - ZU * Sllt.solve(U.transpose() * z);
          };
          dx = solve_h(-gtot);
          // Two rounds of iterative refinement: the barrier Hessian spans
          // ~20 orders of magnitude near the boundary and the raw solve can
          // lose enough digits to derail the Newton decrement.
          for (int ref = 0; ref < 2; ++ref) {
            Eigen::VectorXd resid = D * dx + gtot;
            if (c.n_global > 0) resid += U * (U.transpose() * dx);
            if (!resid.allFinite()) break;
            dx -= solve_h(resid);
          }
          lambda2 = -gtot.dot(dx);
          if (std::isfinite(lambda2) && lambda2 >= -1e-8) {
            lambda2 = std::max(lambda2, 0.0);
            solved = true;
            break;
          }
        }
        const double base = D.diagonal().cwiseAbs().maxCoeff();
        ridge = (ridge == 0.0) ? 1e-10 * (1.0 + base) : ridge * 100.0;
      }
      if (!solved) throw SolverError("newton system could not be solved");
      if (lambda2 <= 2e-10) break;
      ++out.newton;

      // Armijo on the change, not on absolute values: at large t the merit
      // f = -t obj.x + phi is huge and its ulp would swamp the small
      // certified decrease, stalling the search near the central path.
      const double obj_rate = p.objective.dot(dx);
      const double slope = gtot.dot(dx);
      double step = 1.0;
      bool accepted = false;
      for (int h = 0; h < 60; ++h) {
        const Eigen::VectorXd xn = x + step * dx;
        double phin;
        if (barrier_phi(p, xn, phin)) {
          const double df = (phin - phi0) - t * obj_rate * step;
          if (df <= 0.01 * step * slope) {
            x = xn;
            accepted = true;
            break;
          }
        }
        step *= 0.5;
      }
      if (!accepted) break;  // stalled; centering quality checked by caller
      if (x.lpNorm<Eigen::Infinity>() > 1e12) {
        throw SolverError("iterate diverged (objective may be unbounded)");
      }
      const double ox = p.objective.dot(x);
      if (ox > best_obj) {
        best_obj = ox;
        best_x = x;
      }
    }

    const double gap = c.m_terms / t;
    if (gap <= st.tol * (1.0 + std::abs(p.objective.dot(x)))) {
      out.t_bar = t;
      out.gap_reached = true;
      out.centered = lambda2 <= 1e-5;
      out.x = (out.centered || best_obj <= p.objective.dot(x)) ? x : best_x;
      return out;
    }
    t *= st.mu;
  }
  out.x = best_obj > p.objective.dot(x) ? best_x : x;
  out.t_bar = t;
  return out;
}

// Box midpoint (or clamped hint) strictly inside the box bounds.
Eigen::VectorXd interior_start(const ConvexProgram& p) {
  Eigen::VectorXd x(p.n);
  const bool have_hint = p.start_hint.size() == p.n;
  for (int j = 0; j < p.n; ++j) {
    const double lo = p.lower[j], hi = p.upper[j];
    double v = have_hint ? p.start_hint[j] : 0.0;
    if (!have_hint) {
      if (std::isfinite(lo) && std::isfinite(hi)) v = 0.5 * (lo + hi);
      else if (std::isfinite(lo)) v = lo + 1.0;
      else if (std::isfinite(hi)) v = hi - 1.0;
    }
    if (std::isfinite(lo) && std::isfinite(hi)) {
      // Pad keeps the barrier finite without dragging interior hints around.
      const double pad = 1e-8 * std::min(hi - lo, 1.0);
      v = std::min(std::max(v, lo + pad), hi - pad);
    } else if (std::isfinite(lo)) {
      v = std::max(v, lo + 1e-8 * (1.0 + std::abs(lo)));
    } else if (std::isfinite(hi)) {
      v = std::min(v, hi - 1e-8 * (1.0 + std::abs(hi)));
    }
    x[j] = v;
  }
  return x;
}

double max_residual(const ConvexProgram& p, const Eigen::VectorXd& x, int* argmax) {
  double worst = -kInf;
  if (argmax) *argmax = -1;
  for (size_t i = 0; i < p.constraints.size(); ++i) {
    const double r = residual_of(p.constraints[i], x);
    if (r > worst) {
      worst = r;
      if (argmax) *argmax = static_cast<int>(i);
    }
  }
  return worst;
}

}  // namespace

SolveReport solve(const ConvexProgram& prog, const SolverSettings& settings) {
  prog.validate();
  const int n = prog.n;
  SolveReport rep;
  rep.duals = Eigen::VectorXd::Zero(prog.constraints.size());
  rep.dual_lower = Eigen::VectorXd::Zero(n);
  rep.dual_upper = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd x = interior_start(prog);
  int spent = 0;

  // Strictness margin for accepting a start without a feasibility phase.
  const double margin = 1e-11;
  if (max_residual(prog, x, nullptr) >= -margin) {
    // Phase 1: minimize a shared slack sigma added to every constraint.
    ConvexProgram p1 = prog;
    const int sig = n;
    p1.n = n + 1;
    p1.objective = Eigen::VectorXd::Zero(n + 1);
    p1.objective[sig] = -1.0;  // maximize -sigma
    p1.lower.conservativeResize(n + 1);
    p1.upper.conservativeResize(n + 1);
    p1.start_hint = Eigen::VectorXd();
    for (Constraint& c : p1.constraints) {
      if (auto* l = std::get_if<LinearConstraint>(&c)) l->lhs.add(sig, -1.0);
      else if (auto* q = std::get_if<QuadraticConstraint>(&c)) q->lin.add(sig, -1.0);
      else if (auto* s = std::get_if<SocConstraint>(&c)) s->rhs.add(sig, 1.0);
      else std::get<LogConstraint>(c).slack = sig;
    }
    Eigen::VectorXd x1(n + 1);
    x1.head(n) = x;
    const double worst0 = max_residual(prog, x, nullptr);
    const double sigma0 = std::isfinite(worst0)
                              ? worst0 + 0.5 * (1.0 + std::abs(worst0))
                              : throw SolverError("start violates a log domain bound");
    // Big-M box for the slack: the path only decreases sigma from sigma0,
    // so sigma0 + 1 + |sigma0| bounds it; the lower end -1 suffices because
    // the phase stops as soon as sigma turns negative.
    p1.lower[sig] = -1.0;
    p1.upper[sig] = sigma0 + 1.0 + std::abs(sigma0);
    x1[sig] = sigma0;

    const Compiled c1 = compile(p1, settings);
    auto strictly_ok = [&prog, &margin](const Eigen::VectorXd& xfull) {
      return max_residual(prog, xfull.head(prog.n), nullptr) < -margin;
    };
    PathOutcome o1 =
        follow_path(p1, c1, x1, settings, settings.max_newton, strictly_ok);
    spent = o1.newton;
    x = o1.x.head(n);
    int worst_i = -1;
    const double worst = max_residual(prog, x, &worst_i);
    if (!(worst < 0.0)) {
      // A finished feasibility phase that cannot push the slack negative
      // means there is no strict interior; a truncated one proves nothing.
      rep.status = o1.budget_out ? SolveStatus::max_iterations
                                 : SolveStatus::infeasible;
      rep.x = x;
      rep.objective = prog.objective.dot(x);
      rep.feas_residual = std::max(0.0, worst);
      rep.worst_constraint = worst_i;
      rep.iterations = spent;
      return rep;
    }
  }

  const Compiled c2 = compile(prog, settings);
  PathOutcome o2 =
      follow_path(prog, c2, x, settings, settings.max_newton - spent, nullptr);
  rep.iterations = spent + o2.newton;
  rep.x = o2.x;
  rep.objective = prog.objective.dot(o2.x);
  int worst_i = -1;
  const double worst = max_residual(prog, o2.x, &worst_i);
  rep.feas_residual = std::max(0.0, worst);
  rep.worst_constraint = worst_i;
  rep.status = (o2.gap_reached && o2.centered && rep.feas_residual <= settings.feas_tol)
                   ? SolveStatus::optimal
                   : SolveStatus::max_iterations;

  // Approximate multipliers from the final centering weight.
  const double t = o2.t_bar;
  for (size_t i = 0; i < prog.constraints.size(); ++i) {
    const double r = residual_of(prog.constraints[i], o2.x);
    rep.duals[i] = 1.0 / (t * std::max(-r, 1e-300));
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(prog.lower[j])) {
      rep.dual_lower[j] = 1.0 / (t * std::max(o2.x[j] - prog.lower[j], 1e-300));
    }
    if (std::isfinite(prog.upper[j])) {
      rep.dual_upper[j] = 1.0 / (t * std::max(prog.upper[j] - o2.x[j], 1e-300));
    }
  }
  return rep;
}

}  // namespace satuav::conic
