#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman_auv/lifting.hpp"
#include "koopman_auv/plant.hpp"

namespace koopman_auv {

/// Snapshot triplets stored column-wise: x (n x L), u (p x L), y (n x L) with
/// y_k the successor of x_k under u_k. Columns need not be time-contiguous.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::MatrixXd u;
  Eigen::MatrixXd y;
  double dt = 0.0;

  Eigen::Index size() const { return x.cols(); }
  void validate() const;
};

/// Lifted linear predictor z+ = A z + B u, x = C z.
struct LiftedModel {
  Dictionary dictionary;
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::MatrixXd c;
  double alpha = 0.0;
  double fit_residual = 0.0;

  int n() const { return dictionary.n(); }
  int n_lifted() const { return dictionary.n_lifted(); }
  int n_inputs() const { return static_cast<int>(b.cols()); }

  void validate() const;
};

struct FitReport {
  Eigen::Index rank = 0;        // numerical rank of the regressor matrix
  bool rank_deficient = false;  // rank < N + p; minimum-norm solution returned
};

struct CollectionSettings {
  int n_traj = 1000;
  int steps_per_traj = 100;
  double dt = 0.01;
  double input_low = -50.0;
  double input_high = 50.0;
  double v0_low = -0.5;
  double v0_high = 0.5;
  std::uint64_t seed = 1;
};

class CollectionError : public std::runtime_error {
 public:
  CollectionError(int trajectory, const std::string& what)
      : std::runtime_error(what), trajectory_(trajectory) {}
  int trajectory() const { return trajectory_; }

 private:
  int trajectory_;
};

/// Simulates random-input RK4 trajectories of the plant. Each trajectory draws
/// from its own generator derived from (seed, trajectory index).
Dataset collect_dataset(const PlantParams& plant, const CollectionSettings& settings);

struct LinearFit {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  FitReport report;
};

/// Ridge regression on already-lifted snapshots: the solution of
///   [A, B] (G G' + alpha I) = Ybar G',   G = [Xbar; U],
/// computed by an orthogonal factorization of [G'; sqrt(alpha) I]. A rank
/// deficient problem (only possible with alpha == 0) yields the minimum-norm
/// solution.
LinearFit solve_edmd_regression(const Eigen::Ref<const Eigen::MatrixXd>& x_lifted,
                                const Eigen::Ref<const Eigen::MatrixXd>& y_lifted,
                                const Eigen::Ref<const Eigen::MatrixXd>& u, double alpha);

/// Tikhonov-regularized EDMD:
///   min ||Ybar - A Xbar - B U||_F^2 + alpha ||[A, B]||_F^2
/// With alpha == 0 and linearly dependent regressors the minimum-norm solution
/// is returned and the report flags it.
LiftedModel fit(const Dataset& data, const Dictionary& dict, double alpha,
                FitReport* report = nullptr);

/// Lifts x0 once and rolls out the linear model; returns L + 1 points as
/// columns of an n x (L + 1) matrix. `inputs` is p x L.
Eigen::MatrixXd predict_trajectory(const LiftedModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x0,
                                   const Eigen::Ref<const Eigen::MatrixXd>& inputs);

/// Scalar-plant convenience overload.
std::vector<double> predict_trajectory(const LiftedModel& model, double v0,
                                       std::span<const double> inputs);

/// RMSE between the model rollout and the RK4 plant under the same inputs.
double prediction_rmse(const LiftedModel& model, const PlantParams& plant, double v0,
                       std::span<const double> inputs, double dt);

// File formats. Dataset: CSV with header `x,u,y`. Model: JSON document.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, double dt = 0.0);
Dataset parse_dataset_csv(std::istream& in, double dt = 0.0);

std::string model_to_json(const LiftedModel& model);
LiftedModel model_from_json(const std::string& text);
void save_model(const LiftedModel& model, const std::filesystem::path& path);
LiftedModel load_model(const std::filesystem::path& path);

}  // namespace koopman_auv
