#pragma once

#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "koopman_auv/edmd.hpp"
#include "koopman_auv/mpc.hpp"
#include "koopman_auv/plant.hpp"

namespace koopman_auv {

/// Piecewise-constant, left-closed reference built from (time, value)
/// breakpoints. The first breakpoint must be at t = 0.
class ReferenceSignal {
 public:
  explicit ReferenceSignal(std::vector<std::pair<double, double>> breakpoints);

  /// Default tracking profile over 12 s: 0.2, 0.5, -0.2, 0 with switches at 3, 6, 9 s.
  static ReferenceSignal default_profile();

  /// Parses "t0:v0,t1:v1,..." (whitespace ignored).
  static ReferenceSignal parse(const std::string& text);

  double value(double t) const;
  const std::vector<std::pair<double, double>>& breakpoints() const { return breakpoints_; }

 private:
  std::vector<std::pair<double, double>> breakpoints_;
};

/// Square wave starting at +amplitude at t = 0 and toggling every half period.
std::vector<double> square_wave(double amplitude, double period, double dt, int steps);

/// Number of whole steps in `duration`; throws if it is not a multiple of dt.
int steps_in(double duration, double dt);

struct PredictionResult {
  std::vector<double> time;
  std::vector<double> truth;
  std::vector<double> prediction;
  double rmse = 0.0;
};

PredictionResult run_prediction_experiment(const PlantParams& plant, const LiftedModel& model, double v0,
                                           const std::vector<double>& input_signal, double dt);

struct ClosedLoopTrace {
  std::vector<double> t;
  std::vector<double> v;
  std::vector<double> u;
  std::vector<double> du;
  std::vector<double> y_r;
  std::vector<double> cost;
  std::vector<unsigned> flags;

  std::size_t size() const { return t.size(); }
  void push(double time, double speed, double input, double increment, double reference, double stage_cost,
            unsigned flag);
};

class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(int step, const std::string& what) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Closed loop: measure v, hand the controller the reference over the next
/// Nh + 1 samples, apply its input for one RK4 step. One trace row per step.
ClosedLoopTrace run_tracking_experiment(const PlantParams& plant, KoopmanMpc& controller,
                                        const ReferenceSignal& reference, double duration, double dt,
                                        double v0 = 0.0);

struct TraceBounds {
  double u_min = -std::numeric_limits<double>::infinity();
  double u_max = std::numeric_limits<double>::infinity();
  double du_min = -std::numeric_limits<double>::infinity();
  double du_max = std::numeric_limits<double>::infinity();
  double tol = 1e-6;

  static TraceBounds from(const MpcConfig& config);
};

struct SegmentMetrics {
  double start = 0.0;
  double end = 0.0;
  double reference = 0.0;
  double amplitude = 0.0;
  double settling_time = 0.0;  // since segment start; NaN if never settled
  double steady_state_error = 0.0;
};

struct TraceMetrics {
  double max_abs_u = 0.0;
  double max_abs_du = 0.0;
  int violations = 0;
  double total_cost = 0.0;
  std::vector<SegmentMetrics> segments;
};

/// Segments split where y_r changes. Settling: first time |v - y_r| stays
/// within 2% of the segment step. Steady-state error: mean |v - y_r| over the
/// last 10% of the segment.
TraceMetrics trace_metrics(const ClosedLoopTrace& trace, const TraceBounds& bounds = {});

void write_trace_csv(const ClosedLoopTrace& trace, const std::filesystem::path& path);
void write_prediction_csv(const PredictionResult& result, const std::filesystem::path& path);
std::string metrics_to_json(const TraceMetrics& metrics, const TraceBounds& bounds);

}  // namespace koopman_auv
