#include "koopman_auv/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace koopman_auv {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-sided form a' x >= b of a bound on row `row`.
struct HalfSpace {
  Eigen::Index row;
  bool upper;
  double norm;
};

}  // namespace

double QpProblem::objective(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return 0.5 * x.dot(hessian * x) + gradient.dot(x) + constant;
}

double QpProblem::max_violation(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double worst = 0.0;
  if (num_constraints() == 0) return worst;
  const Eigen::VectorXd mx = constraints * x;
  for (Eigen::Index i = 0; i < mx.size(); ++i) {
    if (std::isfinite(lower(i))) worst = std::max(worst, lower(i) - mx(i));
    if (std::isfinite(upper(i))) worst = std::max(worst, mx(i) - upper(i));
  }
  return worst;
}

void QpProblem::validate() const {
  const Eigen::Index n = hessian.rows();
  if (hessian.cols() != n || gradient.size() != n) throw std::invalid_argument("qp: hessian/gradient size mismatch");
  if (constraints.cols() != n && constraints.rows() > 0) throw std::invalid_argument("qp: constraint matrix width mismatch");
  if (lower.size() != constraints.rows() || upper.size() != constraints.rows()) {
    throw std::invalid_argument("qp: bound vectors must match constraint rows");
  }
  if (!hessian.allFinite() || !gradient.allFinite() || !constraints.allFinite()) {
    throw std::invalid_argument("qp: non-finite problem data");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i) || lower(i) == kInf ||
        upper(i) == -kInf) {
      throw std::invalid_argument("qp: invalid bounds on row " + std::to_string(i));
    }
  }
}

QpSolution solve_qp(const QpProblem& qp, double tol) {
  qp.validate();
  const Eigen::Index n = qp.num_variables();
  const Eigen::Index m = qp.num_constraints();

  Eigen::LLT<Eigen::MatrixXd> llt(qp.hessian);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("qp: hessian is not positive definite");
  const Eigen::MatrixXd chol_l = llt.matrixL();

  std::vector<HalfSpace> sides;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = qp.constraints.row(i).norm();
    if (std::isfinite(qp.lower(i))) sides.push_back({i, false, norm});
    if (std::isfinite(qp.upper(i))) sides.push_back({i, true, norm});
  }
  auto normal = [&](const HalfSpace& h) -> Eigen::VectorXd {
    return h.upper ? Eigen::VectorXd(-qp.constraints.row(h.row).transpose())
                   : Eigen::VectorXd(qp.constraints.row(h.row).transpose());
  };
  auto slack = [&](const HalfSpace& h, const Eigen::VectorXd& x) {
    const double ax = qp.constraints.row(h.row).dot(x);
    return h.upper ? qp.upper(h.row) - ax : ax - qp.lower(h.row);
  };

  QpSolution sol;
  sol.x = -llt.solve(qp.gradient);
  std::vector<std::size_t> active;
  std::vector<double> lambda;
  std::vector<char> is_active(sides.size(), 0);

  const int max_iter = static_cast<int>(50 * (sides.size() + static_cast<std::size_t>(n)) + 100);
  int iter = 0;

  auto finish = [&](QpStatus status) {
    sol.status = status;
    sol.multipliers = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd dual_term = Eigen::VectorXd::Zero(n);
    double compl_res = 0.0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const auto& h = sides[active[j]];
      sol.multipliers(h.row) += h.upper ? -lambda[j] : lambda[j];
      dual_term += lambda[j] * normal(h);
      compl_res = std::max(compl_res, std::abs(lambda[j] * slack(h, sol.x)));
    }
    sol.objective = qp.objective(sol.x);
    sol.diagnostics.iterations = iter;
    sol.diagnostics.active_constraints = static_cast<int>(active.size());
    sol.diagnostics.stationarity = (qp.hessian * sol.x + qp.gradient - dual_term).lpNorm<Eigen::Infinity>();
    sol.diagnostics.primal_violation = qp.max_violation(sol.x);
    sol.diagnostics.complementarity = compl_res;
    return sol;
  };

  while (true) {
    // Most violated inactive side, measured as distance to its hyperplane.
    std::size_t pick = sides.size();
    double worst = -tol;
    for (std::size_t i = 0; i < sides.size(); ++i) {
      if (is_active[i]) continue;
      const double s = slack(sides[i], sol.x);
      if (sides[i].norm == 0.0) {
        if (s < -tol) {
          sol.conflicting_rows = {sides[i].row};
          return finish(QpStatus::kInfeasible);
        }
        continue;
      }
      const double scaled = s / sides[i].norm;
      if (scaled < worst) {
        worst = scaled;
        pick = i;
      }
    }
    if (pick == sides.size()) return finish(QpStatus::kOptimal);

    const Eigen::VectorXd np = normal(sides[pick]);
    const Eigen::VectorXd lnp = chol_l.triangularView<Eigen::Lower>().solve(np);
    double lambda_p = 0.0;

    while (true) {
      if (++iter > max_iter) return finish(QpStatus::kIterationLimit);

      // Step directions: primal z = H^-1 (I - N (N'H^-1 N)^-1 N' H^-1) n_p,
      // dual r = (N'H^-1 N)^-1 N'H^-1 n_p, via QR of L^-1 N.
      const auto k = static_cast<Eigen::Index>(active.size());
      Eigen::VectorXd r(k);
      Eigen::VectorXd proj = lnp;
      if (k > 0) {
        Eigen::MatrixXd ln(n, k);
        for (Eigen::Index j = 0; j < k; ++j) ln.col(j) = normal(sides[active[static_cast<std::size_t>(j)]]);
        chol_l.triangularView<Eigen::Lower>().solveInPlace(ln);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(ln);
        const Eigen::MatrixXd q1 = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
        const Eigen::VectorXd coeff = q1.transpose() * lnp;
        r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(coeff);
        proj = lnp - q1 * coeff;
      }
      const bool dependent = proj.norm() <= 1e-12 * std::max(1.0, lnp.norm());
      const Eigen::VectorXd z =
          dependent ? Eigen::VectorXd::Zero(n)
                    : Eigen::VectorXd(chol_l.transpose().triangularView<Eigen::Upper>().solve(proj));

      // Largest dual step keeping active multipliers nonnegative.
      double t_dual = kInf;
      Eigen::Index drop = -1;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (r(j) > 0.0) {
          const double t = lambda[static_cast<std::size_t>(j)] / r(j);
          if (t < t_dual) {
            t_dual = t;
            drop = j;
          }
        }
      }

      double t_primal = kInf;
      if (!dependent) {
        const double curvature = z.dot(np);
        t_primal = -slack(sides[pick], sol.x) / curvature;
      }

      if (dependent && drop < 0) {
        for (auto idx : active) sol.conflicting_rows.push_back(sides[idx].row);
        sol.conflicting_rows.push_back(sides[pick].row);
        std::sort(sol.conflicting_rows.begin(), sol.conflicting_rows.end());
        sol.conflicting_rows.erase(std::unique(sol.conflicting_rows.begin(), sol.conflicting_rows.end()),
                                   sol.conflicting_rows.end());
        return finish(QpStatus::kInfeasible);
      }

      const double t = std::min(t_primal, t_dual);
      if (!dependent) sol.x += t * z;
      for (Eigen::Index j = 0; j < k; ++j) lambda[static_cast<std::size_t>(j)] -= t * r(j);
      lambda_p += t;

      if (t_primal <= t_dual) {
        active.push_back(pick);
        lambda.push_back(lambda_p);
        is_active[pick] = 1;
        break;
      }
      const auto d = static_cast<std::size_t>(drop);
      is_active[active[d]] = 0;
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(d));
      lambda.erase(lambda.begin() + static_cast<std::ptrdiff_t>(d));
    }
  }
}

}  // namespace koopman_auv
