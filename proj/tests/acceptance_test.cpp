// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Artifacts go under --out.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "koopman_auv/edmd.hpp"
#include "koopman_auv/harness.hpp"
#include "koopman_auv/mpc.hpp"
#include "koopman_auv/plant.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace koopman_auv;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Outcome integrator_order() {
  const auto start = std::chrono::steady_clock::now();
  const PlantParams p;
  const double s = 40.0;
  const double duration = 1.0;
  const double reference = oracle::euler_extrapolated(0.0, s, duration, 1e-7, p);
  const double literal = oracle::euler_fine(0.0, s, duration, 1e-7, p);
  auto error = [&](Integrator method, double dt, double truth) {
    std::vector<double> inputs(static_cast<std::size_t>(std::llround(duration / dt)), s);
    return std::abs(simulate(0.0, inputs, dt, p, method).back() - truth);
  };
  const double rk4 = error(Integrator::kRk4, 0.01, reference) / error(Integrator::kRk4, 0.005, reference);
  const double euler = error(Integrator::kEuler, 0.01, reference) / error(Integrator::kEuler, 0.005, reference);
  const double rk4_literal = error(Integrator::kRk4, 0.01, literal) / error(Integrator::kRk4, 0.005, literal);
  const double elapsed = seconds_since(start);
  const bool pass = rk4 >= 12.0 && rk4 <= 20.0 && euler >= 1.8 && euler <= 2.2 && elapsed < 60.0;
  return {pass, format("rk4 factor %.3f in [12,20], euler factor %.3f in [1.8,2.2], %.1f s "
                       "(against the uncorrected 1e-7 Euler oracle the rk4 factor would read %.3g)",
                       rk4, euler, elapsed, rk4_literal)};
}

Outcome regression_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> pick_n(1, 6);
  std::uniform_real_distribution<double> state(-1.0, 1.0);
  std::uniform_real_distribution<double> input(-50.0, 50.0);
  double worst_pinv = 0.0;
  double worst_normal = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int big_n = pick_n(rng);
    const int len = std::uniform_int_distribution<int>(big_n + 2, 200)(rng);
    const Dictionary dict = make_dictionary(1, big_n - 1, -1.0, 1.0, static_cast<std::uint64_t>(trial));
    Dataset data;
    data.x.resize(1, len);
    data.u.resize(1, len);
    data.y.resize(1, len);
    for (int k = 0; k < len; ++k) {
      data.x(0, k) = state(rng);
      data.u(0, k) = input(rng);
      data.y(0, k) = rk4_step(data.x(0, k), data.u(0, k), 0.01, PlantParams{});
    }
    const Eigen::MatrixXd xl = dict.lift_columns(data.x);
    const Eigen::MatrixXd yl = dict.lift_columns(data.y);
    Eigen::MatrixXd g(big_n + 1, len);
    g << xl, data.u;

    const LiftedModel plain = fit(data, dict, 0.0);
    Eigen::MatrixXd ab(big_n, big_n + 1);
    ab << plain.a, plain.b;
    const Eigen::MatrixXd expected = oracle::pinv_regression(xl, yl, data.u);
    worst_pinv = std::max(worst_pinv, (ab - expected).norm() / expected.norm());

    const double alpha = std::pow(10.0, std::uniform_real_distribution<double>(-6.0, 2.0)(rng));
    const LiftedModel ridge = fit(data, dict, alpha);
    ab << ridge.a, ridge.b;
    const Eigen::MatrixXd lhs = yl * g.transpose();
    const Eigen::MatrixXd rhs = ab * (g * g.transpose() + alpha * Eigen::MatrixXd::Identity(big_n + 1, big_n + 1));
    worst_normal = std::max(worst_normal, (lhs - rhs).norm() / lhs.norm());
  }
  const double elapsed = seconds_since(start);
  const bool pass = worst_pinv <= 1e-8 && worst_normal <= 1e-8 && elapsed < 60.0;
  return {pass, format("50 datasets: worst pinv mismatch %.2e, worst ridge normal-equation residual %.2e "
                       "(both <= 1e-8), %.1f s",
                       worst_pinv, worst_normal, elapsed)};
}

Outcome exact_recovery() {
  std::mt19937_64 rng(77);
  const Dictionary dict = make_dictionary(1, 4, -1.0, 1.0, 31);
  const Eigen::Index big_n = dict.n_lifted();
  Eigen::MatrixXd a0 = gaussian(rng, big_n, big_n);
  a0 *= 0.9 / Eigen::JacobiSVD<Eigen::MatrixXd>(a0).singularValues()(0);
  const Eigen::MatrixXd b0 = gaussian(rng, big_n, 1, 0.01);

  std::uniform_real_distribution<double> state(-1.0, 1.0);
  const Eigen::Index len = 200;
  Eigen::MatrixXd x(1, len);
  for (Eigen::Index k = 0; k < len; ++k) x(0, k) = state(rng);
  const Eigen::MatrixXd xl = dict.lift_columns(x);
  const Eigen::MatrixXd u = gaussian(rng, 1, len, 20.0);
  const LinearFit fitted = solve_edmd_regression(xl, a0 * xl + b0 * u, u, 0.0);
  const double err_a = (fitted.a - a0).norm() / a0.norm();
  const double err_b = (fitted.b - b0).norm() / b0.norm();

  // Rollout in lifted coordinates against the generating system.
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, big_n);
  c(0, 0) = 1.0;
  const LiftedModel model{dict, fitted.a, fitted.b, c};
  const Eigen::MatrixXd inputs = gaussian(rng, 1, 100, 20.0);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 0.3);
  const Eigen::MatrixXd predicted = predict_trajectory(model, x0, inputs);
  Eigen::VectorXd z = dict.lift(x0);
  double worst_traj = 0.0;
  for (Eigen::Index k = 0; k < 100; ++k) {
    z = a0 * z + b0 * inputs.col(k);
    worst_traj = std::max(worst_traj, std::abs(predicted(0, k + 1) - z(0)));
  }
  const bool pass = err_a <= 1e-8 && err_b <= 1e-8 && worst_traj <= 1e-8;
  return {pass, format("relative error A %.2e, B %.2e, worst 100-step trajectory error %.2e (all <= 1e-8)", err_a,
                       err_b, worst_traj)};
}

Outcome qp_correctness() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> pick_h(1, 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int active_instances = 0;
  int mismatches = 0;
  int infeasible = 0;
  double worst_obj = 0.0;
  double worst_x = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int nh = pick_h(rng);
    const Dictionary dict = make_dictionary(1, 4, -1.0, 1.0, static_cast<std::uint64_t>(trial));
    Eigen::MatrixXd a = gaussian(rng, 5, 5);
    a *= 0.95 / Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
    Eigen::MatrixXd b = gaussian(rng, 5, 1, 0.02);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 5);
    c(0, 0) = 1.0;
    const double u_bound = 5.0 + 45.0 * unif(rng);
    const double du_bound = 1.0 + 19.0 * unif(rng);
    const double x_bound = trial % 3 == 0 ? 0.2 + unif(rng) : std::numeric_limits<double>::infinity();
    MpcConfig cfg = MpcConfig::scalar(1.0 + 2000.0 * unif(rng), 1.0 + 2000.0 * unif(rng), 0.01 + unif(rng), nh,
                                      u_bound, du_bound, x_bound);
    KoopmanMpc mpc(LiftedModel{dict, a, b, c}, cfg, Eigen::VectorXd::Constant(1, (2.0 * unif(rng) - 1.0) * u_bound));
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.4 * (2.0 * unif(rng) - 1.0));
    const Eigen::MatrixXd ref = Eigen::MatrixXd::Constant(1, nh + 1, 3.0 * (2.0 * unif(rng) - 1.0));
    const CondensedQp problem = mpc.build_qp(x, ref);

    const auto expected = oracle::enumerate_active_sets(problem.qp);
    const QpSolution sol = solve_qp(problem.qp, 1e-10);
    if (!expected.feasible) {
      ++infeasible;
      if (sol.status != QpStatus::kInfeasible) ++mismatches;
      continue;
    }
    if (sol.status != QpStatus::kOptimal) {
      ++mismatches;
      continue;
    }
    if (sol.diagnostics.active_constraints > 0) ++active_instances;
    const double obj_err = std::abs(sol.objective - expected.objective) / std::max(1.0, std::abs(expected.objective));
    const double x_err = (sol.x - expected.x).lpNorm<Eigen::Infinity>();
    worst_obj = std::max(worst_obj, obj_err);
    worst_x = std::max(worst_x, x_err);
    if (obj_err > 1e-6 || x_err > 1e-5) ++mismatches;
  }
  const bool pass = mismatches == 0 && active_instances > 0;
  return {pass, format("200 instances (%d with active constraints, %d infeasible and agreed): %d mismatches, "
                       "worst objective error %.2e (<= 1e-6), worst argmin error %.2e (<= 1e-5)",
                       active_instances, infeasible, mismatches, worst_obj, worst_x)};
}

Outcome structural_check() {
  CollectionSettings s;
  s.n_traj = 50;
  const Dataset data = collect_dataset(PlantParams{}, s);
  const MpcConfig cfg = mpc_preset("matlab");
  Eigen::Index vars[2], rows[2];
  int lifted[2];
  int i = 0;
  for (int n_rbf : {4, 49}) {
    const LiftedModel model = fit(data, make_dictionary(1, n_rbf, -1.0, 1.0, 1), 1e-6);
    const KoopmanMpc mpc(model, cfg);
    const CondensedQp qp = mpc.build_qp(Eigen::VectorXd::Constant(1, 0.1), Eigen::MatrixXd::Constant(1, 11, 0.3));
    lifted[i] = model.n_lifted();
    vars[i] = qp.qp.num_variables();
    rows[i] = qp.qp.num_constraints();
    ++i;
  }
  const bool pass = lifted[0] == 5 && lifted[1] == 50 && vars[0] == vars[1] && rows[0] == rows[1];
  return {pass, format("N=%d: %ld variables, %ld constraints; N=%d: %ld variables, %ld constraints", lifted[0],
                       static_cast<long>(vars[0]), static_cast<long>(rows[0]), lifted[1],
                       static_cast<long>(vars[1]), static_cast<long>(rows[1]))};
}

// Everything criteria 4 to 7 look at, produced from scratch into `dir`.
struct FullScaleRun {
  double collect_fit_seconds = 0.0;
  double tracking_seconds = 0.0;
  std::vector<double> v0s;
  std::vector<double> rmse;
  std::vector<double> truth_rms;
  TraceMetrics matlab;
  TraceMetrics gazebo;
  std::vector<fs::path> csv_files;
};

FullScaleRun full_scale_run(const fs::path& dir) {
  fs::create_directories(dir);
  FullScaleRun run;
  const PlantParams plant;
  const auto start = std::chrono::steady_clock::now();
  CollectionSettings settings;  // 1000 x 100, dt 0.01, inputs +-50, v0 +-0.5
  const Dataset data = collect_dataset(plant, settings);
  const LiftedModel model = fit(data, make_dictionary(1, 4, -1.0, 1.0, settings.seed), 1e-6);
  write_dataset_csv(data, dir / "dataset.csv");
  run.csv_files.push_back(dir / "dataset.csv");

  const auto wave = square_wave(40.0, 0.1, settings.dt, steps_in(1.0, settings.dt));
  run.v0s = {0.0, -0.1};
  for (std::size_t i = 0; i < run.v0s.size(); ++i) {
    const PredictionResult r = run_prediction_experiment(plant, model, run.v0s[i], wave, settings.dt);
    double sq = 0.0;
    for (double v : r.truth) sq += v * v;
    run.rmse.push_back(r.rmse);
    run.truth_rms.push_back(std::sqrt(sq / static_cast<double>(r.truth.size())));
    const fs::path path = dir / ("prediction_" + std::to_string(i) + ".csv");
    write_prediction_csv(r, path);
    run.csv_files.push_back(path);
  }
  run.collect_fit_seconds = seconds_since(start);

  const auto track_start = std::chrono::steady_clock::now();
  for (const char* preset : {"matlab", "gazebo"}) {
    KoopmanMpc mpc(model, mpc_preset(preset));
    const ClosedLoopTrace trace =
        run_tracking_experiment(plant, mpc, ReferenceSignal::default_profile(), 12.0, settings.dt);
    const TraceBounds bounds = TraceBounds::from(mpc.config());
    const TraceMetrics metrics = trace_metrics(trace, bounds);
    const fs::path path = dir / (std::string("trace_") + preset + ".csv");
    write_trace_csv(trace, path);
    run.csv_files.push_back(path);
    std::ofstream(dir / (std::string("metrics_") + preset + ".json")) << metrics_to_json(metrics, bounds);
    (std::string(preset) == "matlab" ? run.matlab : run.gazebo) = metrics;
  }
  run.tracking_seconds = seconds_since(track_start);
  return run;
}

Outcome full_scale_prediction(const FullScaleRun& run) {
  bool pass = run.collect_fit_seconds < 300.0;
  std::string detail;
  for (std::size_t i = 0; i < run.v0s.size(); ++i) {
    const double ratio = run.rmse[i] / run.truth_rms[i];
    pass = pass && ratio <= 0.10;
    detail += format("v0=%g: rmse %.3e, truth rms %.3e, ratio %.2f%% (<= 10%%); ", run.v0s[i], run.rmse[i],
                     run.truth_rms[i], 100.0 * ratio);
  }
  return {pass, detail + format("%.1f s including collection", run.collect_fit_seconds)};
}

Outcome constraint_satisfaction(const FullScaleRun& run) {
  const auto& m = run.matlab;
  const auto& g = run.gazebo;
  const bool pass = m.max_abs_u <= 50.0 + 1e-6 && m.max_abs_du <= 20.0 + 1e-6 && m.violations == 0 &&
                    g.max_abs_u <= 150.0 + 1e-6 && g.max_abs_du <= 50.0 + 1e-6 && g.violations == 0;
  return {pass, format("matlab max|u| %.6g (<= 50), max|du| %.6g (<= 20), %d violations; "
                       "gazebo max|u| %.6g (<= 150), max|du| %.6g (<= 50), %d violations",
                       m.max_abs_u, m.max_abs_du, m.violations, g.max_abs_u, g.max_abs_du, g.violations)};
}

Outcome tracking_quality(const FullScaleRun& run) {
  bool pass = run.tracking_seconds < 120.0;
  std::string detail;
  int checked = 0;
  for (const auto& [name, metrics] : {std::pair{"matlab", &run.matlab}, std::pair{"gazebo", &run.gazebo}}) {
    detail += std::string(name) + ":";
    for (const auto& seg : metrics->segments) {
      if (seg.end - seg.start < 3.0 - 1e-9) continue;
      ++checked;
      const double limit = 0.05 * seg.amplitude;
      const bool ok = seg.steady_state_error <= limit;
      pass = pass && ok;
      detail += format(" [%g,%g) ref %g step %.3g sse %.2e%s%.2e", seg.start, seg.end, seg.reference,
                       seg.amplitude, seg.steady_state_error, ok ? " <= " : " > ", limit);
    }
    detail += "; ";
  }
  pass = pass && checked > 0;
  return {pass, detail + format("%.1f s for both runs", run.tracking_seconds)};
}

Outcome determinism(const FullScaleRun& first, const FullScaleRun& second) {
  int differing = 0;
  std::string names;
  for (std::size_t i = 0; i < first.csv_files.size(); ++i) {
    if (slurp(first.csv_files[i]) != slurp(second.csv_files[i])) {
      ++differing;
      names += " " + first.csv_files[i].filename().string();
    }
  }
  const bool pass = differing == 0 && first.csv_files.size() == second.csv_files.size();
  return {pass, format("%zu CSV files compared across two runs, %d differ", first.csv_files.size(), differing) +
                    names};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string out = "acceptance_out";
  app.add_option("--out", out, "artifact directory");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](int id, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, integrator_order);
  report(2, regression_oracle);
  report(3, exact_recovery);

  FullScaleRun first, second;
  bool have_runs = false;
  std::string run_error;
  try {
    first = full_scale_run(fs::path(out) / "run1");
    second = full_scale_run(fs::path(out) / "run2");
    have_runs = true;
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto needs_runs = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!have_runs) return {false, "full-scale run failed: " + run_error};
      return fn();
    };
  };

  report(4, needs_runs([&] { return full_scale_prediction(first); }));
  report(5, qp_correctness);
  report(6, needs_runs([&] { return constraint_satisfaction(first); }));
  report(7, needs_runs([&] { return tracking_quality(first); }));
  report(8, structural_check);
  report(9, needs_runs([&] { return determinism(first, second); }));

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
