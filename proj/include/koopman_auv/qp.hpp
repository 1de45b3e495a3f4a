#pragma once

#include <vector>

#include <Eigen/Dense>

namespace koopman_auv {

/// Strictly convex quadratic program
///
///   minimize    0.5 x' H x + g' x + constant
///   subject to  lower <= M x <= upper
///
/// Bounds may be +-infinity; such sides are ignored.
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  double constant = 0.0;
  Eigen::MatrixXd constraints;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index num_variables() const { return hessian.rows(); }
  Eigen::Index num_constraints() const { return constraints.rows(); }
  double objective(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Largest amount by which x violates a bound (0 when feasible).
  double max_violation(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void validate() const;
};

enum class QpStatus { kOptimal, kInfeasible, kIterationLimit };

struct QpDiagnostics {
  int iterations = 0;
  int active_constraints = 0;
  double stationarity = 0.0;      // ||H x + g - M' y||_inf
  double primal_violation = 0.0;  // max bound violation
  double complementarity = 0.0;   // max |y_i| * slack_i over active sides
};

struct QpSolution {
  QpStatus status = QpStatus::kOptimal;
  Eigen::VectorXd x;
  /// Multiplier per constraint row; positive when the lower side is active,
  /// negative when the upper side is.
  Eigen::VectorXd multipliers;
  double objective = 0.0;
  QpDiagnostics diagnostics;
  /// For kInfeasible: rows involved in the contradiction (active set plus the
  /// row that could not be added).
  std::vector<Eigen::Index> conflicting_rows;
};

/// Dual active-set method (Goldfarb-Idnani). Starts from the unconstrained
/// minimizer and adds violated constraints one at a time, so no feasible
/// starting point is needed and infeasibility is detected from the dual.
QpSolution solve_qp(const QpProblem& qp, double tol = 1e-9);

}  // namespace koopman_auv
