#include "koopman_auv/mpc.hpp"

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace koopman_auv {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_psd(const Eigen::MatrixXd& m, bool strict) {
  if (m.rows() != m.cols() || !m.allFinite() || m != m.transpose()) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  return strict ? smallest > 0.0 : smallest >= 0.0;
}

void check_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int dim, const char* name) {
  if (lo.size() != dim || hi.size() != dim) {
    throw std::invalid_argument(std::string("mpc config: ") + name + " bounds have wrong dimension");
  }
  for (int i = 0; i < dim; ++i) {
    if (std::isnan(lo(i)) || std::isnan(hi(i)) || !(lo(i) < hi(i))) {
      throw std::invalid_argument(std::string("mpc config: ") + name + "_min must be below " + name + "_max");
    }
  }
}

}  // namespace

AugmentedModel augment(const LiftedModel& model) {
  model.validate();
  const Eigen::Index big_n = model.n_lifted();
  const Eigen::Index p = model.n_inputs();
  AugmentedModel aug;
  aug.a_bar = Eigen::MatrixXd::Zero(big_n + p, big_n + p);
  aug.a_bar.topLeftCorner(big_n, big_n) = model.a;
  aug.a_bar.topRightCorner(big_n, p) = model.b;
  aug.a_bar.bottomRightCorner(p, p).setIdentity();
  aug.b_bar.resize(big_n + p, p);
  aug.b_bar.topRows(big_n) = model.b;
  aug.b_bar.bottomRows(p).setIdentity();
  aug.c_bar = Eigen::MatrixXd::Zero(model.n(), big_n + p);
  aug.c_bar.leftCols(big_n) = model.c;
  return aug;
}

MpcConfig MpcConfig::scalar(double q_u, double q_n, double r, int horizon, double u_bound, double du_bound,
                            double x_bound) {
  MpcConfig c;
  c.q_u = Eigen::MatrixXd::Constant(1, 1, q_u);
  c.q_n = Eigen::MatrixXd::Constant(1, 1, q_n);
  c.r = Eigen::MatrixXd::Constant(1, 1, r);
  c.horizon = horizon;
  c.u_min = Eigen::VectorXd::Constant(1, -u_bound);
  c.u_max = Eigen::VectorXd::Constant(1, u_bound);
  c.du_min = Eigen::VectorXd::Constant(1, -du_bound);
  c.du_max = Eigen::VectorXd::Constant(1, du_bound);
  c.x_min = Eigen::VectorXd::Constant(1, -x_bound);
  c.x_max = Eigen::VectorXd::Constant(1, x_bound);
  return c;
}

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("mpc config: horizon must be >= 1");
  if (!is_psd(q_u, false)) throw std::invalid_argument("mpc config: q_u must be symmetric positive semidefinite");
  if (!is_psd(q_n, false) || q_n.rows() != q_u.rows()) {
    throw std::invalid_argument("mpc config: q_n must be symmetric positive semidefinite and match q_u");
  }
  if (!is_psd(r, true)) throw std::invalid_argument("mpc config: r must be symmetric positive definite");
  check_box(u_min, u_max, p(), "u");
  check_box(du_min, du_max, p(), "du");
  check_box(x_min, x_max, n(), "x");
  if (!(solver_tol > 0.0)) throw std::invalid_argument("mpc config: solver_tol must be positive");
}

MpcConfig mpc_preset(std::string_view name) {
  if (name == "matlab") return MpcConfig::scalar(2000.0, 2000.0, 0.01, 10, 50.0, 20.0);
  if (name == "gazebo") return MpcConfig::scalar(2000.0, 2000.0, 0.01, 10, 150.0, 50.0);
  throw std::invalid_argument("unknown mpc preset '" + std::string(name) + "'");
}

KoopmanMpc::KoopmanMpc(LiftedModel model, MpcConfig config, const Eigen::VectorXd& u_initial)
    : model_(std::move(model)), aug_(augment(model_)), config_(std::move(config)) {
  config_.validate();
  if (config_.n() != model_.n() || config_.p() != model_.n_inputs()) {
    throw std::invalid_argument("mpc: config dimensions do not match the model");
  }
  reset(u_initial.size() == 0 ? Eigen::VectorXd::Zero(config_.p()) : u_initial);
}

void KoopmanMpc::reset(const Eigen::VectorXd& u_prev) {
  if (u_prev.size() != config_.p()) throw std::invalid_argument("mpc: u_prev has wrong dimension");
  if ((u_prev.array() < config_.u_min.array()).any() || (u_prev.array() > config_.u_max.array()).any()) {
    throw std::invalid_argument("mpc: u_prev outside input bounds");
  }
  u_prev_ = u_prev;
}

CondensedQp KoopmanMpc::build_qp(const Eigen::Ref<const Eigen::VectorXd>& x_measured,
                                 const Eigen::Ref<const Eigen::MatrixXd>& ref_window,
                                 bool with_state_bounds) const {
  const int nh = config_.horizon;
  const Eigen::Index n = model_.n();
  const Eigen::Index p = model_.n_inputs();
  const Eigen::Index dim = aug_.a_bar.rows();
  if (x_measured.size() != n) throw std::invalid_argument("mpc: measurement has wrong dimension");
  if (!x_measured.allFinite()) throw std::invalid_argument("mpc: measurement is not finite");
  if (ref_window.rows() != n || ref_window.cols() < 1) {
    throw std::invalid_argument("mpc: reference window must be n x (>= 1)");
  }
  auto reference = [&](int k) { return ref_window.col(std::min<Eigen::Index>(k, ref_window.cols() - 1)); };

  CondensedQp out;
  out.z_bar0.resize(dim);
  out.z_bar0 << model_.dictionary.lift(x_measured), u_prev_;

  // free(k) = c_bar A_bar^k z_bar0; theta(k, j) = c_bar A_bar^(k-1-j) B_bar.
  out.free_response.resize(nh * n, 1);
  out.prediction = Eigen::MatrixXd::Zero(nh * n, nh * p);
  std::vector<Eigen::MatrixXd> markov;  // c_bar A_bar^i B_bar, i = 0..nh-1
  Eigen::MatrixXd c_pow = aug_.c_bar;   // c_bar A_bar^i
  markov.reserve(static_cast<std::size_t>(nh));
  for (int i = 0; i < nh; ++i) {
    markov.push_back(c_pow * aug_.b_bar);
    c_pow = c_pow * aug_.a_bar;
    out.free_response.block(i * n, 0, n, 1) = c_pow * out.z_bar0;
  }
  for (int k = 1; k <= nh; ++k) {
    for (int j = 0; j < k; ++j) {
      out.prediction.block((k - 1) * n, j * p, n, p) = markov[static_cast<std::size_t>(k - 1 - j)];
    }
  }

  Eigen::MatrixXd weight = Eigen::MatrixXd::Zero(nh * n, nh * n);
  Eigen::VectorXd offset(nh * n);
  for (int k = 1; k <= nh; ++k) {
    weight.block((k - 1) * n, (k - 1) * n, n, n) = k == nh ? config_.q_n : config_.q_u;
    offset.segment((k - 1) * n, n) = out.free_response.block((k - 1) * n, 0, n, 1) - reference(k);
  }
  const Eigen::VectorXd e0 = aug_.c_bar * out.z_bar0 - reference(0);

  Eigen::MatrixXd r_bar = Eigen::MatrixXd::Zero(nh * p, nh * p);
  for (int k = 0; k < nh; ++k) r_bar.block(k * p, k * p, p, p) = config_.r;

  const Eigen::MatrixXd wt = out.prediction.transpose() * weight;
  Eigen::MatrixXd hessian = 2.0 * (wt * out.prediction + r_bar);
  out.qp.hessian = 0.5 * (hessian + hessian.transpose());
  out.qp.gradient = 2.0 * wt * offset;
  out.qp.constant = offset.dot(weight * offset) + e0.dot(config_.q_u * e0);

  out.increment_rows = nh * p;
  out.input_rows = nh * p;
  out.output_rows = nh * n;
  const Eigen::Index rows = out.increment_rows + out.input_rows + out.output_rows;
  out.qp.constraints = Eigen::MatrixXd::Zero(rows, nh * p);
  out.qp.lower.resize(rows);
  out.qp.upper.resize(rows);

  out.qp.constraints.topRows(nh * p).setIdentity();
  for (int k = 0; k < nh; ++k) {
    out.qp.lower.segment(k * p, p) = config_.du_min;
    out.qp.upper.segment(k * p, p) = config_.du_max;
    // u_k = u_prev + sum_{j <= k} du_j
    for (int j = 0; j <= k; ++j) {
      out.qp.constraints.block(nh * p + k * p, j * p, p, p).setIdentity();
    }
    out.qp.lower.segment(nh * p + k * p, p) = config_.u_min - u_prev_;
    out.qp.upper.segment(nh * p + k * p, p) = config_.u_max - u_prev_;
  }
  const Eigen::Index base = 2 * nh * p;
  out.qp.constraints.bottomRows(nh * n) = out.prediction;
  for (int k = 1; k <= nh; ++k) {
    const auto seg = out.free_response.block((k - 1) * n, 0, n, 1).col(0);
    if (with_state_bounds) {
      out.qp.lower.segment(base + (k - 1) * n, n) = config_.x_min - seg;
      out.qp.upper.segment(base + (k - 1) * n, n) = config_.x_max - seg;
    } else {
      out.qp.lower.segment(base + (k - 1) * n, n).setConstant(-kInf);
      out.qp.upper.segment(base + (k - 1) * n, n).setConstant(kInf);
    }
  }
  return out;
}

Eigen::VectorXd KoopmanMpc::step(const Eigen::Ref<const Eigen::VectorXd>& x_measured,
                                 const Eigen::Ref<const Eigen::MatrixXd>& ref_window, StepInfo* info) {
  StepInfo local;
  CondensedQp problem = build_qp(x_measured, ref_window);
  QpSolution sol = solve_qp(problem.qp, config_.solver_tol);
  if (sol.status == QpStatus::kInfeasible) {
    local.flags |= kStepStateBoundsDropped;
    problem = build_qp(x_measured, ref_window, false);
    sol = solve_qp(problem.qp, config_.solver_tol);
  }
  if (sol.status != QpStatus::kOptimal) {
    throw MpcSolverError(sol.status == QpStatus::kInfeasible ? "mpc: QP infeasible after dropping state bounds"
                                                             : "mpc: QP solver hit its iteration limit");
  }

  const Eigen::Index p = config_.p();
  const Eigen::VectorXd du = sol.x.head(p).cwiseMax(config_.du_min).cwiseMin(config_.du_max);
  Eigen::VectorXd u = (u_prev_ + du).cwiseMax(config_.u_min).cwiseMin(config_.u_max);
  if ((u - (u_prev_ + sol.x.head(p))).cwiseAbs().maxCoeff() > 1e-6) local.flags |= kStepInputClamped;

  local.delta_u = u - u_prev_;
  local.plan = sol.x;
  local.objective = sol.objective;
  local.status = sol.status;
  local.diagnostics = sol.diagnostics;
  u_prev_ = u;
  if (info) *info = std::move(local);
  return u;
}

}  // namespace koopman_auv
