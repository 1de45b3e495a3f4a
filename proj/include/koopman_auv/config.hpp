#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "koopman_auv/edmd.hpp"
#include "koopman_auv/harness.hpp"
#include "koopman_auv/mpc.hpp"
#include "koopman_auv/plant.hpp"

namespace koopman_auv {

/// Everything one pipeline run needs. Loaded from a `key = value` text file
/// (format version 1, `#` starts a comment) and patched with `--set` pairs.
struct RunConfig {
  static constexpr int kFormatVersion = 1;

  PlantParams plant;

  int n_rbf = 4;
  double center_low = -1.0;
  double center_high = 1.0;
  double rbf_width = 1.0;
  std::optional<std::uint64_t> dict_seed;  // falls back to `seed`

  CollectionSettings collection;
  double alpha = 1e-6;

  std::string mpc_preset = "matlab";
  std::map<std::string, double> mpc_overrides;  // q_u, q_n, r, horizon, bounds, solver_tol

  std::string reference = "0:0.2,3:0.5,6:-0.2,9:0";
  double duration = 12.0;
  double v0 = 0.0;

  std::vector<double> predict_v0 = {0.0, -0.1};
  double wave_amplitude = 40.0;
  double wave_period = 0.1;
  double predict_duration = 1.0;

  std::uint64_t seed() const { return collection.seed; }
  std::uint64_t dictionary_seed() const { return dict_seed.value_or(collection.seed); }

  /// Assigns one key. Throws std::invalid_argument for unknown keys or
  /// malformed values.
  void set(const std::string& key, const std::string& value);
  /// Applies a `key=value` override string.
  void apply_override(const std::string& assignment);

  Dictionary make_dictionary() const;
  MpcConfig mpc() const;
  ReferenceSignal reference_signal() const;

  /// Checks every numeric range; throws std::invalid_argument.
  void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace koopman_auv
