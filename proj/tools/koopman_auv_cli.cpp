// koopman_auv: collect -> fit -> predict / track pipeline for the surge-speed
// Koopman MPC. Exit codes: 0 success, 1 usage or config error, 2 runtime or
// numerical failure (including constraint violations in `track`).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "koopman_auv/config.hpp"
#include "koopman_auv/edmd.hpp"
#include "koopman_auv/harness.hpp"
#include "koopman_auv/mpc.hpp"

namespace fs = std::filesystem;
using namespace koopman_auv;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<long long> seed;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Run configuration file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--seed", opts.seed, "Random seed for data collection and dictionary centers");
  cmd->add_option("--set", opts.overrides, "Override a configuration key (key=value); repeatable");
}

// Usage/config failures map to exit 1, everything after that to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig resolve_config(const CommonOptions& opts) {
  try {
    RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
    if (opts.seed) cfg.set("seed", std::to_string(*opts.seed));
    for (const auto& o : opts.overrides) cfg.apply_override(o);
    cfg.validate();
    return cfg;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

fs::path prepare_out(const CommonOptions& opts) {
  const fs::path out(opts.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw UsageError("cannot create output directory " + out.string());
  return out;
}

int cmd_collect(const CommonOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts);
  const Dataset data = collect_dataset(cfg.plant, cfg.collection);
  const fs::path file = out / "dataset.csv";
  write_dataset_csv(data, file);
  std::printf("wrote %s\n", file.string().c_str());
  std::printf("snapshots L = %lld\n", static_cast<long long>(data.size()));
  std::printf("x: min %.6g max %.6g mean %.6g\n", data.x.minCoeff(), data.x.maxCoeff(), data.x.mean());
  std::printf("u: min %.6g max %.6g mean %.6g\n", data.u.minCoeff(), data.u.maxCoeff(), data.u.mean());
  return 0;
}

int cmd_fit(const CommonOptions& opts, const std::string& data_path) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts);
  const fs::path input = data_path.empty() ? out / "dataset.csv" : fs::path(data_path);
  const Dataset data = read_dataset_csv(input, cfg.collection.dt);
  FitReport report;
  const LiftedModel model = fit(data, cfg.make_dictionary(), cfg.alpha, &report);
  const fs::path file = out / "model.json";
  save_model(model, file);
  std::printf("wrote %s\n", file.string().c_str());
  std::printf("A: %lldx%lld  B: %lldx%lld  C: %lldx%lld\n", static_cast<long long>(model.a.rows()),
              static_cast<long long>(model.a.cols()), static_cast<long long>(model.b.rows()),
              static_cast<long long>(model.b.cols()), static_cast<long long>(model.c.rows()),
              static_cast<long long>(model.c.cols()));
  std::printf("fit_residual = %.17g\n", model.fit_residual);
  if (report.rank_deficient) {
    std::fprintf(stderr, "warning: regressor Gram matrix is rank deficient (rank %lld); used pseudoinverse\n",
                 static_cast<long long>(report.rank));
  }
  return 0;
}

fs::path model_path(const CommonOptions& opts, const std::string& path) {
  return path.empty() ? fs::path(opts.out_dir) / "model.json" : fs::path(path);
}

int cmd_predict(const CommonOptions& opts, const std::string& model_file) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts);
  const LiftedModel model = load_model(model_path(opts, model_file));
  const double dt = cfg.collection.dt;
  int steps = 0;
  try {
    steps = steps_in(cfg.predict_duration, dt);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto inputs = square_wave(cfg.wave_amplitude, cfg.wave_period, dt, steps);
  for (std::size_t i = 0; i < cfg.predict_v0.size(); ++i) {
    const auto result = run_prediction_experiment(cfg.plant, model, cfg.predict_v0[i], inputs, dt);
    const fs::path file = out / ("prediction_" + std::to_string(i) + ".csv");
    write_prediction_csv(result, file);
    std::printf("scenario %zu v0=%.17g rmse=%.17g file=%s\n", i, cfg.predict_v0[i], result.rmse,
                file.string().c_str());
  }
  return 0;
}

int cmd_track(const CommonOptions& opts, const std::string& model_file) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts);
  LiftedModel model = load_model(model_path(opts, model_file));
  const MpcConfig mpc = cfg.mpc();
  KoopmanMpc controller(std::move(model), mpc);
  ClosedLoopTrace trace;
  try {
    trace = run_tracking_experiment(cfg.plant, controller, cfg.reference_signal(), cfg.duration,
                                    cfg.collection.dt, cfg.v0);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path trace_file = out / "trace.csv";
  write_trace_csv(trace, trace_file);
  if (trace.size() == 0) {
    std::printf("wrote %s (empty run)\n", trace_file.string().c_str());
    return 0;
  }
  const TraceBounds bounds = TraceBounds::from(mpc);
  const TraceMetrics metrics = trace_metrics(trace, bounds);
  const fs::path metrics_file = out / "metrics.json";
  std::ofstream(metrics_file) << metrics_to_json(metrics, bounds);
  std::printf("wrote %s and %s\n", trace_file.string().c_str(), metrics_file.string().c_str());
  std::printf("max|u| = %.6g (bounds [%g, %g])  max|du| = %.6g (bounds [%g, %g])  violations = %d\n",
              metrics.max_abs_u, bounds.u_min, bounds.u_max, metrics.max_abs_du, bounds.du_min, bounds.du_max,
              metrics.violations);
  for (const auto& s : metrics.segments) {
    std::printf("segment [%g, %g) y_r=%g steady_state_error=%.3g settling_time=%g\n", s.start, s.end, s.reference,
                s.steady_state_error, s.settling_time);
  }
  return metrics.violations == 0 ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman/EDMD identification and constrained MPC of AUV surge speed"};
  app.require_subcommand(1);

  CommonOptions collect_opts, fit_opts, predict_opts, track_opts;
  std::string data_path, predict_model, track_model;

  auto* collect = app.add_subcommand("collect", "Simulate random-input trajectories and write dataset.csv");
  add_common(collect, collect_opts);

  auto* fit_cmd = app.add_subcommand("fit", "Fit the lifted linear model and write model.json");
  add_common(fit_cmd, fit_opts);
  fit_cmd->add_option("--data", data_path, "Dataset CSV (default: <out>/dataset.csv)");

  auto* predict = app.add_subcommand("predict", "Compare model rollouts against the plant under a square wave");
  add_common(predict, predict_opts);
  predict->add_option("--model", predict_model, "Model file (default: <out>/model.json)");

  auto* track = app.add_subcommand("track", "Run closed-loop reference tracking with the MPC");
  add_common(track, track_opts);
  track->add_option("--model", track_model, "Model file (default: <out>/model.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*collect) return cmd_collect(collect_opts);
    if (*fit_cmd) return cmd_fit(fit_opts, data_path);
    if (*predict) return cmd_predict(predict_opts, predict_model);
    if (*track) return cmd_track(track_opts, track_model);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ExperimentError& e) {
    std::fprintf(stderr, "error: aborted at step %d: %s\n", e.step(), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
