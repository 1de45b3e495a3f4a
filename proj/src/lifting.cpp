#include "koopman_auv/lifting.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace koopman_auv {

Dictionary::Dictionary(int n, std::vector<Eigen::VectorXd> centers, double rbf_width,
                       std::uint64_t seed)
    : n_(n), centers_(std::move(centers)), rbf_width_(rbf_width), seed_(seed) {
  if (n_ < 1) throw std::invalid_argument("dictionary state dimension must be >= 1");
  if (!(rbf_width_ > 0.0) || !std::isfinite(rbf_width_)) {
    throw std::invalid_argument("rbf width must be positive and finite");
  }
  for (const auto& c : centers_) {
    if (c.size() != n_) throw std::invalid_argument("rbf center has wrong dimension");
    if (!c.allFinite()) throw std::invalid_argument("rbf center is not finite");
  }
}

Eigen::VectorXd Dictionary::lift(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != n_) throw std::invalid_argument("lift: state has wrong dimension");
  if (!x.allFinite()) throw std::invalid_argument("lift: state is not finite");
  Eigen::VectorXd z(n_lifted());
  z.head(n_) = x;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    z(n_ + static_cast<Eigen::Index>(i)) = gaussian_rbf(x, centers_[i], rbf_width_);
  }
  return z;
}

Eigen::MatrixXd Dictionary::lift_columns(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  Eigen::MatrixXd z(n_lifted(), x.cols());
  for (Eigen::Index k = 0; k < x.cols(); ++k) z.col(k) = lift(x.col(k));
  return z;
}

Eigen::VectorXd Dictionary::project(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (z.size() != n_lifted()) throw std::invalid_argument("project: lifted vector has wrong dimension");
  return z.head(n_);
}

Eigen::MatrixXd Dictionary::output_matrix() const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n_, n_lifted());
  c.leftCols(n_).setIdentity();
  return c;
}

Dictionary make_dictionary(int n, int n_rbf, double center_low, double center_high,
                           std::uint64_t seed, double rbf_width) {
  if (n_rbf < 0) throw std::invalid_argument("make_dictionary: n_rbf must be >= 0");
  if (!(center_low < center_high)) {
    throw std::invalid_argument("make_dictionary: center_low must be below center_high");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(center_low, center_high);
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(static_cast<std::size_t>(n_rbf));
  for (int i = 0; i < n_rbf; ++i) {
    Eigen::VectorXd c(n);
    for (int j = 0; j < n; ++j) c(j) = dist(rng);
    centers.push_back(std::move(c));
  }
  return Dictionary(n, std::move(centers), rbf_width, seed);
}

double gaussian_rbf(const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& center, double width) {
  return std::exp(-(x - center).squaredNorm() / (2.0 * width * width));
}

}  // namespace koopman_auv
