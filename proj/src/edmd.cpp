#include "koopman_auv/edmd.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace koopman_auv {
namespace {

using json = nlohmann::json;

// Independent stream per trajectory so collection order never changes the data.
std::mt19937_64 trajectory_rng(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::runtime_error(std::string("model file: matrix ") + name + " has inconsistent size");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[static_cast<std::size_t>(i * cols + j2)].get<double>();
  }
  return m;
}

}  // namespace

void Dataset::validate() const {
  if (x.cols() != y.cols() || x.cols() != u.cols()) {
    throw std::invalid_argument("dataset: x, u and y must have the same number of snapshots");
  }
  if (x.rows() != y.rows()) throw std::invalid_argument("dataset: x and y dimensions differ");
  if (!x.allFinite() || !y.allFinite() || !u.allFinite()) {
    throw std::invalid_argument("dataset: entries must be finite");
  }
}

void LiftedModel::validate() const {
  const Eigen::Index big_n = n_lifted();
  if (a.rows() != big_n || a.cols() != big_n) throw std::invalid_argument("model: A must be N x N");
  if (b.rows() != big_n || b.cols() < 1) throw std::invalid_argument("model: B must be N x p");
  if (c.rows() != n() || c.cols() != big_n) throw std::invalid_argument("model: C must be n x N");
  if (c != dictionary.output_matrix()) throw std::invalid_argument("model: C must equal [I, 0]");
}

Dataset collect_dataset(const PlantParams& plant, const CollectionSettings& s) {
  plant.validate();
  if (s.n_traj < 1) throw std::invalid_argument("collect: n_traj must be >= 1");
  if (s.steps_per_traj < 1) throw std::invalid_argument("collect: steps_per_traj must be >= 1");
  if (!(s.dt > 0.0)) throw std::invalid_argument("collect: dt must be positive");
  if (s.input_low > s.input_high || s.v0_low > s.v0_high) {
    throw std::invalid_argument("collect: sampling ranges must satisfy low <= high");
  }

  const Eigen::Index total = static_cast<Eigen::Index>(s.n_traj) * s.steps_per_traj;
  Dataset data{Eigen::MatrixXd(1, total), Eigen::MatrixXd(1, total), Eigen::MatrixXd(1, total), s.dt};

  auto uniform = [](std::mt19937_64& rng, double low, double high) {
    return low == high ? low : std::uniform_real_distribution<double>(low, high)(rng);
  };

  for (int traj = 0; traj < s.n_traj; ++traj) {
    auto rng = trajectory_rng(s.seed, traj);
    double v = uniform(rng, s.v0_low, s.v0_high);
    for (int k = 0; k < s.steps_per_traj; ++k) {
      const double input = uniform(rng, s.input_low, s.input_high);
      const double next = rk4_step(v, input, s.dt, plant);
      if (!std::isfinite(next)) {
        throw CollectionError(traj, "collect: trajectory " + std::to_string(traj) +
                                        " diverged at step " + std::to_string(k));
      }
      const Eigen::Index col = static_cast<Eigen::Index>(traj) * s.steps_per_traj + k;
      data.x(0, col) = v;
      data.u(0, col) = input;
      data.y(0, col) = next;
      v = next;
    }
  }
  return data;
}

LinearFit solve_edmd_regression(const Eigen::Ref<const Eigen::MatrixXd>& x_lifted,
                                const Eigen::Ref<const Eigen::MatrixXd>& y_lifted,
                                const Eigen::Ref<const Eigen::MatrixXd>& u, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("fit: alpha must be >= 0");
  if (x_lifted.cols() < 1) throw std::invalid_argument("fit: no snapshots");
  if (y_lifted.cols() != x_lifted.cols() || u.cols() != x_lifted.cols() || y_lifted.rows() != x_lifted.rows()) {
    throw std::invalid_argument("fit: lifted snapshot matrices disagree in size");
  }
  const Eigen::Index big_n = x_lifted.rows();
  const Eigen::Index p = u.rows();

  const Eigen::Index len = x_lifted.cols();
  const Eigen::Index width = big_n + p;

  // Ridge regression as one least-squares problem on the stacked system
  //   [G'; sqrt(alpha) I] [A, B]' = [Ybar'; 0],
  // whose normal equations are exactly [A, B] (G G' + alpha I) = Ybar G'.
  // Factoring the stacked matrix instead of G G' keeps the conditioning of G.
  Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(len + width, width);
  stacked.topLeftCorner(len, big_n) = x_lifted.transpose();
  stacked.topRightCorner(len, p) = u.transpose();
  stacked.bottomRows(width).diagonal().setConstant(std::sqrt(alpha));
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(len + width, big_n);
  rhs.topRows(len) = y_lifted.transpose();

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(static_cast<double>(width) * std::numeric_limits<double>::epsilon());
  cod.compute(stacked);

  LinearFit out;
  out.report.rank = cod.rank();
  out.report.rank_deficient = out.report.rank < width;
  const Eigen::MatrixXd ab = cod.solve(rhs).transpose();
  out.a = ab.leftCols(big_n);
  out.b = ab.rightCols(p);
  return out;
}

LiftedModel fit(const Dataset& data, const Dictionary& dict, double alpha, FitReport* report) {
  data.validate();
  if (data.size() < 1) throw std::invalid_argument("fit: no snapshots");
  if (data.x.rows() != dict.n()) throw std::invalid_argument("fit: dataset state dimension differs from dictionary");

  const Eigen::MatrixXd x_lifted = dict.lift_columns(data.x);
  const Eigen::MatrixXd y_lifted = dict.lift_columns(data.y);
  LinearFit solution = solve_edmd_regression(x_lifted, y_lifted, data.u, alpha);
  if (report) *report = solution.report;

  LiftedModel model{dict, std::move(solution.a), std::move(solution.b), dict.output_matrix(), alpha, 0.0};
  model.fit_residual =
      (y_lifted - model.a * x_lifted - model.b * data.u).norm() / static_cast<double>(data.size());
  return model;
}

Eigen::MatrixXd predict_trajectory(const LiftedModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x0,
                                   const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  if (inputs.cols() > 0 && inputs.rows() != model.n_inputs()) {
    throw std::invalid_argument("predict: input dimension differs from model");
  }
  Eigen::MatrixXd out(model.n(), inputs.cols() + 1);
  out.col(0) = x0;
  Eigen::VectorXd z = model.dictionary.lift(x0);
  for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
    z = model.a * z + model.b * inputs.col(k);
    out.col(k + 1) = model.c * z;
  }
  return out;
}

std::vector<double> predict_trajectory(const LiftedModel& model, double v0,
                                       std::span<const double> inputs) {
  const Eigen::Map<const Eigen::MatrixXd> u(inputs.data(), 1, static_cast<Eigen::Index>(inputs.size()));
  const Eigen::MatrixXd traj = predict_trajectory(model, Eigen::VectorXd::Constant(1, v0), u);
  return {traj.data(), traj.data() + traj.size()};
}

double prediction_rmse(const LiftedModel& model, const PlantParams& plant, double v0,
                       std::span<const double> inputs, double dt) {
  if (inputs.empty()) return 0.0;
  const auto truth = simulate(v0, inputs, dt, plant);
  const auto pred = predict_trajectory(model, v0, inputs);
  double sum = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) sum += (truth[k] - pred[k]) * (truth[k] - pred[k]);
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  if (data.x.rows() != 1 || data.u.rows() != 1) {
    throw std::invalid_argument("dataset CSV supports scalar state and input only");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
  out << "x,u,y\n";
  for (Eigen::Index k = 0; k < data.size(); ++k) {
    out << format_double(data.x(0, k)) << ',' << format_double(data.u(0, k)) << ','
        << format_double(data.y(0, k)) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing dataset file " + path.string());
}

Dataset parse_dataset_csv(std::istream& in, double dt) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + msg);
  };
  auto strip = [](std::string& s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  };

  if (!std::getline(in, line)) throw std::runtime_error("dataset: no snapshots");
  ++line_no;
  strip(line);
  if (line != "x,u,y") fail("expected header 'x,u,y'");

  std::vector<double> xs, us, ys;
  while (std::getline(in, line)) {
    ++line_no;
    strip(line);
    if (line.empty()) continue;
    double values[3];
    std::size_t pos = 0;
    for (int field = 0; field < 3; ++field) {
      const std::size_t end = field < 2 ? line.find(',', pos) : line.size();
      if (end == std::string::npos) fail("expected 3 comma-separated fields");
      const std::string token = line.substr(pos, end - pos);
      char* parse_end = nullptr;
      values[field] = std::strtod(token.c_str(), &parse_end);
      if (token.empty() || parse_end != token.c_str() + token.size()) fail("malformed number '" + token + "'");
      if (!std::isfinite(values[field])) fail("non-finite value");
      pos = end + 1;
    }
    if (line.find(',', line.rfind(',') + 1) != std::string::npos) fail("too many fields");
    xs.push_back(values[0]);
    us.push_back(values[1]);
    ys.push_back(values[2]);
  }
  if (xs.empty()) throw std::runtime_error("dataset: no snapshots");

  const auto len = static_cast<Eigen::Index>(xs.size());
  Dataset data{Eigen::Map<Eigen::MatrixXd>(xs.data(), 1, len), Eigen::Map<Eigen::MatrixXd>(us.data(), 1, len),
               Eigen::Map<Eigen::MatrixXd>(ys.data(), 1, len), dt};
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path, double dt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
  return parse_dataset_csv(in, dt);
}

std::string model_to_json(const LiftedModel& model) {
  json centers = json::array();
  for (const auto& c : model.dictionary.centers()) centers.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  json doc = {
      {"format", "koopman_auv.lifted_model"},
      {"version", 1},
      {"n", model.n()},
      {"N", model.n_lifted()},
      {"p", model.n_inputs()},
      {"seed", model.dictionary.seed()},
      {"rbf_width", model.dictionary.rbf_width()},
      {"centers", std::move(centers)},
      {"A", matrix_to_json(model.a)},
      {"B", matrix_to_json(model.b)},
      {"C", matrix_to_json(model.c)},
      {"alpha", model.alpha},
      {"fit_residual", model.fit_residual},
  };
  return doc.dump(2) + "\n";
}

LiftedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "koopman_auv.lifted_model") {
      throw std::runtime_error("model file: unknown format");
    }
    if (doc.at("version").get<int>() != 1) throw std::runtime_error("model file: unsupported version");
    const int n = doc.at("n").get<int>();
    std::vector<Eigen::VectorXd> centers;
    for (const auto& c : doc.at("centers")) {
      const auto values = c.get<std::vector<double>>();
      centers.emplace_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    Dictionary dict(n, std::move(centers), doc.at("rbf_width").get<double>(), doc.at("seed").get<std::uint64_t>());
    if (dict.n_lifted() != doc.at("N").get<int>()) throw std::runtime_error("model file: N disagrees with centers");

    LiftedModel model{dict, matrix_from_json(doc.at("A"), "A"), matrix_from_json(doc.at("B"), "B"),
                      matrix_from_json(doc.at("C"), "C"), doc.at("alpha").get<double>(),
                      doc.at("fit_residual").get<double>()};
    if (model.n_inputs() != doc.at("p").get<int>()) throw std::runtime_error("model file: p disagrees with B");
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
}

void save_model(const LiftedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << model_to_json(model);
}

LiftedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace koopman_auv
