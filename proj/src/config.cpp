#include "koopman_auv/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace koopman_auv {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || std::isnan(out)) {
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

long long to_integer(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long out = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t to_seed(const std::string& key, const std::string& value) {
  const long long v = to_integer(key, value);
  if (v < 0) throw std::invalid_argument("config: key '" + key + "' must be non-negative");
  return static_cast<std::uint64_t>(v);
}

const char* const kMpcKeys[] = {"q_u",    "q_n",    "r",     "horizon", "u_min",     "u_max",
                                "du_min", "du_max", "x_min", "x_max",   "solver_tol"};

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  auto real = [&](double& field) { field = to_double(key, value); };
  auto integer = [&](int& field) { field = static_cast<int>(to_integer(key, value)); };

  using Setter = std::function<void()>;
  const std::map<std::string, Setter> setters = {
      {"config_version",
       [&] {
         if (to_integer(key, value) != kFormatVersion) {
           throw std::invalid_argument("config: unsupported config_version " + value);
         }
       }},
      {"m", [&] { real(plant.m); }},
      {"x_vdot", [&] { real(plant.x_vdot); }},
      {"x_vv", [&] { real(plant.x_vv); }},
      {"t_ded", [&] { real(plant.t_ded); }},
      {"rho", [&] { real(plant.rho); }},
      {"d", [&] { real(plant.d); }},
      {"alpha1", [&] { real(plant.alpha1); }},
      {"alpha2", [&] { real(plant.alpha2); }},
      {"omega", [&] { real(plant.omega); }},
      {"n_rbf", [&] { integer(n_rbf); }},
      {"center_low", [&] { real(center_low); }},
      {"center_high", [&] { real(center_high); }},
      {"rbf_width", [&] { real(rbf_width); }},
      {"dict_seed", [&] { dict_seed = to_seed(key, value); }},
      {"seed", [&] { collection.seed = to_seed(key, value); }},
      {"n_traj", [&] { integer(collection.n_traj); }},
      {"steps", [&] { integer(collection.steps_per_traj); }},
      {"dt", [&] { real(collection.dt); }},
      {"input_low", [&] { real(collection.input_low); }},
      {"input_high", [&] { real(collection.input_high); }},
      {"v0_low", [&] { real(collection.v0_low); }},
      {"v0_high", [&] { real(collection.v0_high); }},
      {"alpha", [&] { real(alpha); }},
      {"mpc_preset",
       [&] {
         koopman_auv::mpc_preset(value);
         mpc_preset = value;
       }},
      {"reference",
       [&] {
         ReferenceSignal::parse(value);
         reference = value;
       }},
      {"duration", [&] { real(duration); }},
      {"v0", [&] { real(v0); }},
      {"predict_v0",
       [&] {
         std::vector<double> values;
         std::stringstream ss(value);
         std::string item;
         while (std::getline(ss, item, ',')) values.push_back(to_double(key, trim(item)));
         if (values.empty()) throw std::invalid_argument("config: predict_v0 needs at least one value");
         predict_v0 = std::move(values);
       }},
      {"wave_amplitude", [&] { real(wave_amplitude); }},
      {"wave_period", [&] { real(wave_period); }},
      {"predict_duration", [&] { real(predict_duration); }},
  };

  if (const auto it = setters.find(key); it != setters.end()) {
    it->second();
    return;
  }
  for (const char* mpc_key : kMpcKeys) {
    if (key == mpc_key) {
      mpc_overrides[key] = to_double(key, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("config: override '" + assignment + "' is not key=value");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

Dictionary RunConfig::make_dictionary() const {
  return koopman_auv::make_dictionary(1, n_rbf, center_low, center_high, dictionary_seed(), rbf_width);
}

MpcConfig RunConfig::mpc() const {
  MpcConfig c = koopman_auv::mpc_preset(mpc_preset);
  for (const auto& [key, value] : mpc_overrides) {
    if (key == "q_u") c.q_u(0, 0) = value;
    else if (key == "q_n") c.q_n(0, 0) = value;
    else if (key == "r") c.r(0, 0) = value;
    else if (key == "horizon") {
      if (value != std::floor(value)) throw std::invalid_argument("config: horizon must be an integer");
      c.horizon = static_cast<int>(value);
    }
    else if (key == "u_min") c.u_min(0) = value;
    else if (key == "u_max") c.u_max(0) = value;
    else if (key == "du_min") c.du_min(0) = value;
    else if (key == "du_max") c.du_max(0) = value;
    else if (key == "x_min") c.x_min(0) = value;
    else if (key == "x_max") c.x_max(0) = value;
    else if (key == "solver_tol") c.solver_tol = value;
  }
  return c;
}

ReferenceSignal RunConfig::reference_signal() const { return ReferenceSignal::parse(reference); }

void RunConfig::validate() const {
  plant.validate();
  if (n_rbf < 0) throw std::invalid_argument("config: n_rbf must be >= 0");
  if (!(center_low < center_high)) throw std::invalid_argument("config: center_low must be below center_high");
  if (!(rbf_width > 0.0)) throw std::invalid_argument("config: rbf_width must be positive");
  if (collection.n_traj < 1 || collection.steps_per_traj < 1) {
    throw std::invalid_argument("config: n_traj and steps must be >= 1");
  }
  if (!(collection.dt > 0.0) || !std::isfinite(collection.dt)) throw std::invalid_argument("config: dt must be positive");
  if (collection.input_low > collection.input_high) throw std::invalid_argument("config: input_low > input_high");
  if (collection.v0_low > collection.v0_high) throw std::invalid_argument("config: v0_low > v0_high");
  if (!(alpha >= 0.0)) throw std::invalid_argument("config: alpha must be >= 0");
  if (!(duration >= 0.0) || !(predict_duration >= 0.0)) throw std::invalid_argument("config: durations must be >= 0");
  if (!(wave_period > 0.0)) throw std::invalid_argument("config: wave_period must be positive");
  mpc().validate();
  reference_signal();
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  return parse_config(in);
}

}  // namespace koopman_auv
