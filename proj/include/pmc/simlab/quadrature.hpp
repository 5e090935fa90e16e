#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "pmc/error.hpp"

namespace pmc {

struct QuadratureRule {
  std::vector<double> nodes, weights;
};

namespace detail {

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix, weights mu0 * v0^2.
inline QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
  const auto n = offdiag.size() + 1;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) jac(k, k + 1) = jac(k + 1, k) = offdiag(k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  QuadratureRule q;
  for (Eigen::Index k = 0; k < n; ++k) {
    q.nodes.push_back(es.eigenvalues()(k));
    const double v = es.eigenvectors()(0, k);
    q.weights.push_back(mu0 * v * v);
  }
  return q;
}

}  // namespace detail

// Gauss-Legendre on [lo, hi], weights summing to 1 (expectation under U[lo, hi]).
inline QuadratureRule uniform_rule(int n, double lo, double hi) {
  if (n < 1) throw ValidationError("quadrature needs at least one node");
  if (n == 1) return {{0.5 * (lo + hi)}, {1.0}};
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  auto q = detail::golub_welsch(b, 1.0);
  for (double& x : q.nodes) x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
  return q;
}

// Gauss-Hermite for N(mean, sd^2), weights summing to 1.
inline QuadratureRule normal_rule(int n, double mean, double sd) {
  if (n < 1) throw ValidationError("quadrature needs at least one node");
  if (n == 1) return {{mean}, {1.0}};
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b(k - 1) = std::sqrt(static_cast<double>(k));  // probabilists' Hermite
  auto q = detail::golub_welsch(b, 1.0);
  for (double& x : q.nodes) x = mean + sd * x;
  return q;
}

}  // namespace pmc
