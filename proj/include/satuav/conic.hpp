#pragma once

#include <Eigen/Core>
#include <string>
#include <variant>
#include <vector>

#include "satuav/errors.hpp"

namespace satuav::conic {

// Sparse affine form sum_j coef[j]*x[idx[j]] + offset.
struct AffineExpr {
  std::vector<int> idx;
  std::vector<double> coef;
  double offset = 0.0;

  void add(int i, double c) {
    idx.push_back(i);
    coef.push_back(c);
  }
  double eval(const Eigen::VectorXd& x) const {
    double v = offset;
    for (size_t j = 0; j < idx.size(); ++j) v += coef[j] * x[idx[j]];
    return v;
  }
};

// lhs(x) <= rhs
struct LinearConstraint {
  AffineExpr lhs;
  double rhs = 0.0;
};

// sum_r rows_r(x)^2 + lin(x) <= rhs; convex by sum-of-squares assembly.
struct QuadraticConstraint {
  std::vector<AffineExpr> rows;
  AffineExpr lin;
  double rhs = 0.0;
};

// || rows(x) || <= rhs(x)
struct SocConstraint {
  std::vector<AffineExpr> rows;
  AffineExpr rhs;
};

// x[t] <= w * log2(1 + s * x[xi]); requires s > 0, w > 0 and a non-negative
// lower box bound on x[xi]. slack, when set, subtracts x[slack] from the
// left side (used by the solver's own feasibility phase).
struct LogConstraint {
  int t = -1;
  int xi = -1;
  double w = 1.0;
  double s = 1.0;
  int slack = -1;
};

using Constraint =
    std::variant<LinearConstraint, QuadraticConstraint, SocConstraint, LogConstraint>;

// Maximize objective . x subject to the constraint list and box bounds.
// Bounds may be +-infinity. start_hint, when non-empty, seeds the solver.
struct ConvexProgram {
  int n = 0;
  Eigen::VectorXd objective;
  std::vector<Constraint> constraints;
  std::vector<std::string> labels;  // empty, or one label per constraint
  Eigen::VectorXd lower, upper;
  Eigen::VectorXd start_hint;

  void resize(int vars);
  int add(Constraint c, std::string label = {});
  std::string label_of(int i) const;
  void validate() const;  // throws ValidationError on structural problems
};

enum class SolveStatus { optimal, infeasible, max_iterations };

struct SolveReport {
  SolveStatus status = SolveStatus::max_iterations;
  Eigen::VectorXd x;
  double objective = 0.0;
  double feas_residual = 0.0;  // max positive violation at x (0 when interior)
  int iterations = 0;          // Newton steps across both phases
  int worst_constraint = -1;   // most violated constraint when infeasible
  Eigen::VectorXd duals;       // per-constraint multipliers at the final center
  Eigen::VectorXd dual_lower, dual_upper;  // box multipliers
};

struct SolverSettings {
  double tol = 1e-6;        // relative objective accuracy
  double feas_tol = 1e-8;   // absolute feasibility threshold
  int max_newton = 800;     // Newton step budget per solve
  double mu = 20.0;         // barrier weight growth per stage
  int local_support_max = 12;  // wider constraint gradients go low-rank
};

// Deterministic barrier interior-point solve: identical programs produce
// bitwise-identical reports.
SolveReport solve(const ConvexProgram& prog, const SolverSettings& settings = {});

inline SolveReport solve(const ConvexProgram& prog, double tol) {
  SolverSettings st;
  st.tol = tol;
  return solve(prog, st);
}

struct Feasibility {
  bool feasible = true;
  double worst_residual = 0.0;
  int worst_constraint = -1;  // -1 when a box bound is the worst offender
  int worst_variable = -1;    // set when a box bound is the worst offender
};

// Evaluates every constraint and box at x.
Feasibility check_feasible(const ConvexProgram& prog, const Eigen::VectorXd& x,
                           double tol);

}  // namespace satuav::conic
