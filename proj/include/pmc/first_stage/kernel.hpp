#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "pmc/error.hpp"

namespace pmc {

// Nadaraya-Watson regression with a product Gaussian kernel on standardized
// inputs. Bandwidth per coordinate is multiplier * 1.06 * n^{-1/(p+4)}
// (Silverman's rule for unit-variance data).
class KernelRegressor {
 public:
  KernelRegressor() = default;
  KernelRegressor(Eigen::MatrixXd x, Eigen::VectorXd y, double multiplier)
      : x_(std::move(x)), y_(std::move(y)), multiplier_(multiplier) {
    if (!(multiplier > 0.0)) throw ValidationError("kernel bandwidth multiplier must be positive");
    if (x_.rows() == 0 || x_.rows() != y_.size()) throw ValidationError("kernel regression needs matching, nonempty data");
    const double p = static_cast<double>(x_.cols());
    bandwidth_ = multiplier_ * 1.06 * std::pow(static_cast<double>(x_.rows()), -1.0 / (p + 4.0));
    mean_y_ = y_.mean();
  }

  static double rule_of_thumb(std::size_t n, std::size_t p) {
    return 1.06 * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(p) + 4.0));
  }

  double bandwidth() const noexcept { return bandwidth_; }
  double multiplier() const noexcept { return multiplier_; }
  const Eigen::MatrixXd& points() const noexcept { return x_; }
  const Eigen::VectorXd& targets() const noexcept { return y_; }

  double predict(std::span<const double> q) const {
    const Eigen::Index n = x_.rows(), p = x_.cols();
    const double inv = 1.0 / (bandwidth_ * bandwidth_);
    // Log-weights shifted by their maximum so distant queries do not underflow.
    std::vector<double> logw(n);
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < p; ++c) {
        const double d = q[c] - x_(i, c);
        d2 += d * d;
      }
      logw[i] = -0.5 * d2 * inv;
      top = std::max(top, logw[i]);
    }
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = std::exp(logw[i] - top);
      num += w * y_(i);
      den += w;
    }
    return den > 0.0 ? num / den : mean_y_;
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  double multiplier_ = 1.0, bandwidth_ = 1.0, mean_y_ = 0.0;
};

}  // namespace pmc
