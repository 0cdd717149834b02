#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace condisim {

/// Per-coordinate affine map to zero mean / unit variance, fitted on the
/// training split only.
struct Standardizer {
  static constexpr double kScaleFloor = 1e-8;

  Eigen::VectorXd theta_shift, theta_scale;
  Eigen::VectorXd y_shift, y_scale;
  /// Coordinates whose scale hit the floor (theta first, then y offset by theta_dim).
  std::vector<int> floored;

  static Standardizer fit(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& y) {
    if (theta.cols() == 0 || theta.cols() != y.cols())
      throw std::invalid_argument("fit_standardizer: training split must be nonempty and paired");
    Standardizer s;
    fit_block(theta, s.theta_shift, s.theta_scale, s.floored, 0);
    fit_block(y, s.y_shift, s.y_scale, s.floored, static_cast<int>(theta.rows()));
    return s;
  }

  Eigen::MatrixXd theta_forward(const Eigen::MatrixXd& x) const { return forward(x, theta_shift, theta_scale); }
  Eigen::MatrixXd theta_inverse(const Eigen::MatrixXd& x) const { return inverse(x, theta_shift, theta_scale); }
  Eigen::MatrixXd y_forward(const Eigen::MatrixXd& x) const { return forward(x, y_shift, y_scale); }
  Eigen::MatrixXd y_inverse(const Eigen::MatrixXd& x) const { return inverse(x, y_shift, y_scale); }

 private:
  static void fit_block(const Eigen::MatrixXd& x, Eigen::VectorXd& shift, Eigen::VectorXd& scale,
                        std::vector<int>& floored, int offset) {
    const double n = static_cast<double>(x.cols());
    shift = x.rowwise().mean();
    scale.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double var = (x.row(i).array() - shift(i)).square().sum() / n;
      scale(i) = std::sqrt(var);
      if (!(scale(i) >= kScaleFloor)) {
        scale(i) = kScaleFloor;
        floored.push_back(offset + static_cast<int>(i));
      }
    }
  }

  static Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::VectorXd& shift,
                                 const Eigen::VectorXd& scale) {
    if (x.rows() != shift.size()) throw std::invalid_argument("standardizer: dimension mismatch");
    return (x.colwise() - shift).array().colwise() / scale.array();
  }

  static Eigen::MatrixXd inverse(const Eigen::MatrixXd& x, const Eigen::VectorXd& shift,
                                 const Eigen::VectorXd& scale) {
    if (x.rows() != shift.size()) throw std::invalid_argument("standardizer: dimension mismatch");
    return (x.array().colwise() * scale.array()).matrix().colwise() + shift;
  }
};

}  // namespace condisim
