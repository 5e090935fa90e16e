#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "pmc/error.hpp"
#include "pmc/panel.hpp"

namespace pmc {

struct OlsFit {
  std::vector<double> coefficients;  // raw slope estimates
  std::vector<double> direction;     // slopes normalized to unit length
  double residual_ss = 0.0;
};

// Linear-probability regression of y_ijt on X_ijt over all (i, j, t) rows. The
// plain fit includes an intercept; the fixed-effect fit demeans outcome and
// covariates within each (i, j) cell instead.
inline OlsFit ols_baseline(const PanelDataset& data, bool with_fixed_effects) {
  const int N = data.n_agents(), J = data.n_products(), T = data.n_periods(), D = data.n_covariates();
  const Eigen::Index rows = Eigen::Index(N) * J * T;
  const int cols = with_fixed_effects ? D : D + 1;
  Eigen::MatrixXd x(rows, cols);
  Eigen::VectorXd y(rows);
  Eigen::Index r = 0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < J; ++j) {
      std::vector<double> mean(D + 1, 0.0);
      if (with_fixed_effects) {
        for (int t = 0; t < T; ++t) {
          for (int d = 0; d < D; ++d) mean[d] += data.x(i, j, t, d) / T;
          mean[D] += data.outcome(i, j, t) / T;
        }
      }
      for (int t = 0; t < T; ++t, ++r) {
        for (int d = 0; d < D; ++d) x(r, d) = data.x(i, j, t, d) - mean[d];
        if (!with_fixed_effects) x(r, D) = 1.0;
        y(r) = data.outcome(i, j, t) - mean[D];
      }
    }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < cols) {
    std::string names;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < cols; ++k) {
      const int c = perm(k);
      if (!names.empty()) names += ", ";
      names += c == D ? std::string("intercept") : "x" + std::to_string(c + 1);
    }
    throw ValidationError(std::string(with_fixed_effects ? "OLS-FE" : "OLS") +
                          " design is rank deficient; collinear column(s): " + names);
  }
  const Eigen::VectorXd b = qr.solve(y);
  OlsFit fit;
  fit.coefficients.assign(b.data(), b.data() + D);
  double norm = 0.0;
  for (double v : fit.coefficients) norm += v * v;
  norm = std::sqrt(norm);
  fit.direction = fit.coefficients;
  if (norm > 0.0)
    for (double& v : fit.direction) v /= norm;
  fit.residual_ss = (x * b - y).squaredNorm();
  return fit;
}

}  // namespace pmc
