#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "koopman_auv/edmd.hpp"
#include "koopman_auv/qp.hpp"

namespace koopman_auv {

/// Lifted model with the previous input appended to the state so the decision
/// variable becomes the input increment:
///   [z+; u] = [A B; 0 I] [z; u_prev] + [B; I] du
struct AugmentedModel {
  Eigen::MatrixXd a_bar;
  Eigen::MatrixXd b_bar;
  Eigen::MatrixXd c_bar;
};

AugmentedModel augment(const LiftedModel& model);

struct MpcConfig {
  Eigen::MatrixXd q_u;  // stage output weight, n x n
  Eigen::MatrixXd q_n;  // terminal output weight, n x n
  Eigen::MatrixXd r;    // increment weight, p x p
  int horizon = 10;
  Eigen::VectorXd u_min, u_max;
  Eigen::VectorXd du_min, du_max;
  Eigen::VectorXd x_min, x_max;
  double solver_tol = 1e-9;

  int n() const { return static_cast<int>(q_u.rows()); }
  int p() const { return static_cast<int>(r.rows()); }

  /// Scalar weights and symmetric bounds for n = p = 1.
  static MpcConfig scalar(double q_u, double q_n, double r, int horizon, double u_bound, double du_bound,
                          double x_bound = std::numeric_limits<double>::infinity());

  void validate() const;
};

/// Named presets: "matlab" (inputs +-50, increments +-20) and "gazebo"
/// (inputs +-150, increments +-50). Both use Q_u = Q_N = 2000, R = 0.01,
/// horizon 10 and no state bounds.
MpcConfig mpc_preset(std::string_view name);

/// Condensed QP in the increment sequence (du_0, ..., du_{Nh-1}). Constraint
/// rows are ordered: increment boxes, input boxes, output boxes for k = 1..Nh.
struct CondensedQp {
  QpProblem qp;
  Eigen::VectorXd z_bar0;
  Eigen::MatrixXd free_response;  // output prediction for k = 1..Nh at du = 0, stacked
  Eigen::MatrixXd prediction;     // d(outputs k = 1..Nh) / d(du sequence)
  Eigen::Index increment_rows = 0;
  Eigen::Index input_rows = 0;
  Eigen::Index output_rows = 0;
};

class MpcSolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum StepFlags : unsigned {
  kStepOk = 0,
  kStepStateBoundsDropped = 1u << 0,
  kStepInputClamped = 1u << 1,
};

struct StepInfo {
  unsigned flags = kStepOk;
  Eigen::VectorXd delta_u;  // increment actually applied
  Eigen::VectorXd plan;     // full optimal increment sequence
  double objective = 0.0;
  QpStatus status = QpStatus::kOptimal;
  QpDiagnostics diagnostics;
};

/// Receding-horizon controller. Holds u_{k-1}; confine each instance to one
/// control thread.
class KoopmanMpc {
 public:
  KoopmanMpc(LiftedModel model, MpcConfig config,
             const Eigen::VectorXd& u_initial = Eigen::VectorXd());

  const LiftedModel& model() const { return model_; }
  const AugmentedModel& augmented() const { return aug_; }
  const MpcConfig& config() const { return config_; }
  const Eigen::VectorXd& u_prev() const { return u_prev_; }
  void reset(const Eigen::VectorXd& u_prev);

  /// `ref_window` holds references as columns for k = 0..Nh; shorter windows
  /// are padded with their last column.
  CondensedQp build_qp(const Eigen::Ref<const Eigen::VectorXd>& x_measured,
                       const Eigen::Ref<const Eigen::MatrixXd>& ref_window,
                       bool with_state_bounds = true) const;

  /// Solves the QP, applies only the first increment and stores the result as
  /// the new u_prev. Falls back to dropping the output bounds when the full
  /// problem is infeasible. Throws MpcSolverError if even that fails.
  Eigen::VectorXd step(const Eigen::Ref<const Eigen::VectorXd>& x_measured,
                       const Eigen::Ref<const Eigen::MatrixXd>& ref_window, StepInfo* info = nullptr);

 private:
  LiftedModel model_;
  AugmentedModel aug_;
  MpcConfig config_;
  Eigen::VectorXd u_prev_;
};

}  // namespace koopman_auv
