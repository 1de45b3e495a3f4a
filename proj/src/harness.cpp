#include "koopman_auv/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace koopman_auv {
namespace {

// Breakpoint times and sample times are both produced by floating arithmetic;
// treat a sample landing within this much of a breakpoint as past it.
constexpr double kTimeSlack = 1e-9;

std::string fmt(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

nlohmann::json number_or_null(double value) {
  return std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(nullptr);
}

}  // namespace

ReferenceSignal::ReferenceSignal(std::vector<std::pair<double, double>> breakpoints)
    : breakpoints_(std::move(breakpoints)) {
  if (breakpoints_.empty()) throw std::invalid_argument("reference: needs at least one breakpoint");
  if (breakpoints_.front().first != 0.0) throw std::invalid_argument("reference: first breakpoint must be at t = 0");
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    if (!std::isfinite(breakpoints_[i].first) || !std::isfinite(breakpoints_[i].second)) {
      throw std::invalid_argument("reference: breakpoints must be finite");
    }
    if (i > 0 && !(breakpoints_[i].first > breakpoints_[i - 1].first)) {
      throw std::invalid_argument("reference: breakpoint times must be strictly increasing");
    }
  }
}

ReferenceSignal ReferenceSignal::default_profile() {
  return ReferenceSignal({{0.0, 0.2}, {3.0, 0.5}, {6.0, -0.2}, {9.0, 0.0}});
}

ReferenceSignal ReferenceSignal::parse(const std::string& text) {
  std::vector<std::pair<double, double>> points;
  std::string cleaned;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) cleaned.push_back(ch);
  }
  std::stringstream ss(cleaned);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("reference: expected 'time:value', got '" + item + "'");
    try {
      std::size_t used_t = 0;
      std::size_t used_v = 0;
      const std::string ts = item.substr(0, colon);
      const std::string vs = item.substr(colon + 1);
      const double t = std::stod(ts, &used_t);
      const double v = std::stod(vs, &used_v);
      if (used_t != ts.size() || used_v != vs.size()) throw std::invalid_argument("trailing characters");
      points.emplace_back(t, v);
    } catch (const std::exception&) {
      throw std::invalid_argument("reference: malformed breakpoint '" + item + "'");
    }
  }
  return ReferenceSignal(std::move(points));
}

double ReferenceSignal::value(double t) const {
  double current = breakpoints_.front().second;
  for (const auto& [time, value] : breakpoints_) {
    if (time <= t + kTimeSlack) current = value;
    else break;
  }
  return current;
}

std::vector<double> square_wave(double amplitude, double period, double dt, int steps) {
  if (!(period > 0.0) || !(dt > 0.0)) throw std::invalid_argument("square_wave: period and dt must be positive");
  std::vector<double> out(static_cast<std::size_t>(std::max(steps, 0)));
  const double half = 0.5 * period;
  for (int k = 0; k < steps; ++k) {
    const auto phase = static_cast<long long>(std::floor(k * dt / half + kTimeSlack));
    out[static_cast<std::size_t>(k)] = phase % 2 == 0 ? amplitude : -amplitude;
  }
  return out;
}

int steps_in(double duration, double dt) {
  if (!(dt > 0.0) || !(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0 and dt > 0");
  const double ratio = duration / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-6) throw std::invalid_argument("duration must be a multiple of dt");
  return static_cast<int>(rounded);
}

PredictionResult run_prediction_experiment(const PlantParams& plant, const LiftedModel& model, double v0,
                                           const std::vector<double>& input_signal, double dt) {
  PredictionResult out;
  const std::size_t len = input_signal.size();
  out.time.resize(len + 1);
  for (std::size_t k = 0; k <= len; ++k) out.time[k] = static_cast<double>(k) * dt;
  if (len == 0) {
    out.truth = {v0};
    out.prediction = {v0};
    return out;
  }
  out.truth = simulate(v0, input_signal, dt, plant);
  out.prediction = predict_trajectory(model, v0, input_signal);
  double sum = 0.0;
  for (std::size_t k = 0; k <= len; ++k) {
    const double e = out.truth[k] - out.prediction[k];
    sum += e * e;
  }
  out.rmse = std::sqrt(sum / static_cast<double>(len + 1));
  return out;
}

void ClosedLoopTrace::push(double time, double speed, double input, double increment, double reference,
                           double stage_cost, unsigned flag) {
  t.push_back(time);
  v.push_back(speed);
  u.push_back(input);
  du.push_back(increment);
  y_r.push_back(reference);
  cost.push_back(stage_cost);
  flags.push_back(flag);
}

ClosedLoopTrace run_tracking_experiment(const PlantParams& plant, KoopmanMpc& controller,
                                        const ReferenceSignal& reference, double duration, double dt, double v0) {
  const MpcConfig& cfg = controller.config();
  if (cfg.n() != 1 || cfg.p() != 1) throw std::invalid_argument("tracking experiment needs a scalar model");
  const int steps = steps_in(duration, dt);
  const int nh = cfg.horizon;
  const double q = cfg.q_u(0, 0);
  const double r = cfg.r(0, 0);

  ClosedLoopTrace trace;
  double v = v0;
  Eigen::MatrixXd window(1, nh + 1);
  Eigen::VectorXd x(1);
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    for (int j = 0; j <= nh; ++j) window(0, j) = reference.value((k + j) * dt);
    x(0) = v;
    StepInfo info;
    Eigen::VectorXd u;
    try {
      u = controller.step(x, window, &info);
    } catch (const MpcSolverError& e) {
      throw ExperimentError(k, "step " + std::to_string(k) + ": " + e.what());
    }
    const double yr = window(0, 0);
    const double du = info.delta_u(0);
    trace.push(t, v, u(0), du, yr, q * (v - yr) * (v - yr) + r * du * du, info.flags);
    v = rk4_step(v, u(0), dt, plant);
    if (!std::isfinite(v)) throw ExperimentError(k, "step " + std::to_string(k) + ": plant state became non-finite");
  }
  return trace;
}

TraceBounds TraceBounds::from(const MpcConfig& config) {
  return {config.u_min(0), config.u_max(0), config.du_min(0), config.du_max(0), 1e-6};
}

TraceMetrics trace_metrics(const ClosedLoopTrace& trace, const TraceBounds& bounds) {
  if (trace.size() == 0) throw std::invalid_argument("trace_metrics: empty trace");
  TraceMetrics m;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    m.max_abs_u = std::max(m.max_abs_u, std::abs(trace.u[k]));
    m.max_abs_du = std::max(m.max_abs_du, std::abs(trace.du[k]));
    m.total_cost += trace.cost[k];
    const bool bad = trace.u[k] < bounds.u_min - bounds.tol || trace.u[k] > bounds.u_max + bounds.tol ||
                     trace.du[k] < bounds.du_min - bounds.tol || trace.du[k] > bounds.du_max + bounds.tol;
    if (bad) ++m.violations;
  }

  const double dt = trace.size() > 1 ? trace.t[1] - trace.t[0] : 0.0;
  std::size_t begin = 0;
  double previous = trace.v.front();
  while (begin < trace.size()) {
    std::size_t end = begin + 1;
    while (end < trace.size() && trace.y_r[end] == trace.y_r[begin]) ++end;

    SegmentMetrics seg;
    seg.start = trace.t[begin];
    seg.end = trace.t[end - 1] + dt;
    seg.reference = trace.y_r[begin];
    seg.amplitude = std::abs(seg.reference - previous);
    const double band = 0.02 * seg.amplitude;

    // Walk back from the end to find where the error last left the band.
    std::size_t settled = end;
    for (std::size_t k = end; k-- > begin;) {
      if (std::abs(trace.v[k] - trace.y_r[k]) > band) break;
      settled = k;
    }
    seg.settling_time = settled < end ? trace.t[settled] - seg.start : std::numeric_limits<double>::quiet_NaN();

    const std::size_t count = end - begin;
    const std::size_t tail = std::max<std::size_t>(1, count / 10);
    double err = 0.0;
    for (std::size_t k = end - tail; k < end; ++k) err += std::abs(trace.v[k] - trace.y_r[k]);
    seg.steady_state_error = err / static_cast<double>(tail);

    m.segments.push_back(seg);
    previous = seg.reference;
    begin = end;
  }
  return m;
}

void write_trace_csv(const ClosedLoopTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file " + path.string());
  out << "t,v,u,du,y_r,cost,flags\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out << fmt(trace.t[k]) << ',' << fmt(trace.v[k]) << ',' << fmt(trace.u[k]) << ',' << fmt(trace.du[k]) << ','
        << fmt(trace.y_r[k]) << ',' << fmt(trace.cost[k]) << ',' << trace.flags[k] << '\n';
  }
  if (!out) throw std::runtime_error("failed writing trace file " + path.string());
}

void write_prediction_csv(const PredictionResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write prediction file " + path.string());
  out << "t,truth,prediction\n";
  for (std::size_t k = 0; k < result.truth.size(); ++k) {
    out << fmt(result.time[k]) << ',' << fmt(result.truth[k]) << ',' << fmt(result.prediction[k]) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing prediction file " + path.string());
}

std::string metrics_to_json(const TraceMetrics& metrics, const TraceBounds& bounds) {
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& s : metrics.segments) {
    segments.push_back({{"start", s.start},
                        {"end", s.end},
                        {"reference", s.reference},
                        {"amplitude", s.amplitude},
                        {"settling_time", number_or_null(s.settling_time)},
                        {"steady_state_error", s.steady_state_error}});
  }
  nlohmann::json doc = {
      {"max_abs_u", metrics.max_abs_u},
      {"max_abs_du", metrics.max_abs_du},
      {"violations", metrics.violations},
      {"total_cost", metrics.total_cost},
      {"bounds",
       {{"u_min", number_or_null(bounds.u_min)},
        {"u_max", number_or_null(bounds.u_max)},
        {"du_min", number_or_null(bounds.du_min)},
        {"du_max", number_or_null(bounds.du_max)},
        {"tol", bounds.tol}}},
      {"segments", std::move(segments)},
  };
  return doc.dump(2) + "\n";
}

}  // namespace koopman_auv
