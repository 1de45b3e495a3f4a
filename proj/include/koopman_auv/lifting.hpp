#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace koopman_auv {

/// Observable dictionary: the n identity coordinates followed by Gaussian
/// radial basis functions. Immutable once built.
class Dictionary {
 public:
  Dictionary(int n, std::vector<Eigen::VectorXd> centers, double rbf_width = 1.0,
             std::uint64_t seed = 0);

  int n() const { return n_; }
  int n_lifted() const { return n_ + static_cast<int>(centers_.size()); }
  int n_rbf() const { return static_cast<int>(centers_.size()); }
  double rbf_width() const { return rbf_width_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Eigen::VectorXd>& centers() const { return centers_; }

  /// z = [x; g_1(x); ...; g_{N-n}(x)]. Throws on non-finite or wrongly sized x.
  Eigen::VectorXd lift(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Lifts every column of a n x L matrix.
  Eigen::MatrixXd lift_columns(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// Applies C = [I, 0].
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  /// The n x N output matrix [I, 0].
  Eigen::MatrixXd output_matrix() const;

 private:
  int n_;
  std::vector<Eigen::VectorXd> centers_;
  double rbf_width_;
  std::uint64_t seed_;
};

/// Centers are drawn i.i.d. uniform on [center_low, center_high]^n from a
/// generator seeded with `seed`.
Dictionary make_dictionary(int n, int n_rbf, double center_low, double center_high,
                           std::uint64_t seed, double rbf_width = 1.0);

/// exp(-|x - center|^2 / (2 width^2)).
double gaussian_rbf(const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& center, double width = 1.0);

}  // namespace koopman_auv
