#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

namespace pmc {

// Per-column affine map to zero mean and unit standard deviation. Constant
// columns keep scale 1.
struct Standardizer {
  std::vector<double> mean, scale;

  static Standardizer fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    const auto cols = static_cast<std::size_t>(x.cols());
    s.mean.resize(cols);
    s.scale.resize(cols);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double m = x.col(c).mean();
      const double var = x.rows() > 1 ? (x.col(c).array() - m).square().sum() / double(x.rows() - 1) : 0.0;
      s.mean[c] = m;
      s.scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  std::size_t size() const noexcept { return mean.size(); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) out.col(c) = (x.col(c).array() - mean[c]) / scale[c];
    return out;
  }

  void apply(std::span<const double> row, std::span<double> out) const {
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - mean[c]) / scale[c];
  }
};

}  // namespace pmc
