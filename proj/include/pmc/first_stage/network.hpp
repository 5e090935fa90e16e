#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "pmc/error.hpp"
#include "pmc/rng.hpp"

namespace pmc {

struct NetworkTraining {
  int max_epochs = 1500;
  double learning_rate = 0.02;
  int patience = 100;                // epochs without validation improvement
  double validation_fraction = 0.2;  // holdout used for early stopping
  double ridge = 1e-4;
};

// One hidden layer of sigmoid units with a linear output:
//   f(x) = w2' sigmoid(W1 x + b1) + b2.
// Parameters are packed as [W1 (row-major, hidden x inputs), b1, w2, b2].
class ShallowNetwork {
 public:
  ShallowNetwork() = default;
  ShallowNetwork(int inputs, int hidden) : inputs_(inputs), hidden_(hidden) {
    if (inputs < 1 || hidden < 1) throw ValidationError("network needs at least one input and one hidden unit");
    w1_ = Eigen::MatrixXd::Zero(hidden, inputs);
    b1_ = Eigen::VectorXd::Zero(hidden);
    w2_ = Eigen::VectorXd::Zero(hidden);
  }

  // Glorot-uniform hidden weights, small output weights, output bias at `bias`.
  void initialize(Rng& rng, double bias) {
    const double a = std::sqrt(6.0 / (inputs_ + hidden_));
    for (Eigen::Index r = 0; r < w1_.rows(); ++r)
      for (Eigen::Index c = 0; c < w1_.cols(); ++c) w1_(r, c) = uniform(rng, -a, a);
    for (Eigen::Index r = 0; r < b1_.size(); ++r) b1_(r) = uniform(rng, -0.5, 0.5);
    for (Eigen::Index r = 0; r < w2_.size(); ++r) w2_(r) = uniform(rng, -0.1, 0.1);
    b2_ = bias;
  }

  int inputs() const noexcept { return inputs_; }
  int hidden() const noexcept { return hidden_; }
  std::size_t parameter_count() const noexcept { return std::size_t(hidden_) * (inputs_ + 2) + 1; }

  std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (Eigen::Index r = 0; r < w1_.rows(); ++r)
      for (Eigen::Index c = 0; c < w1_.cols(); ++c) p.push_back(w1_(r, c));
    for (Eigen::Index r = 0; r < b1_.size(); ++r) p.push_back(b1_(r));
    for (Eigen::Index r = 0; r < w2_.size(); ++r) p.push_back(w2_(r));
    p.push_back(b2_);
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw ValidationError("network parameter vector has the wrong length");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < w1_.rows(); ++r)
      for (Eigen::Index c = 0; c < w1_.cols(); ++c) w1_(r, c) = p[k++];
    for (Eigen::Index r = 0; r < b1_.size(); ++r) b1_(r) = p[k++];
    for (Eigen::Index r = 0; r < w2_.size(); ++r) w2_(r) = p[k++];
    b2_ = p[k];
  }

  double predict(std::span<const double> x) const {
    double out = b2_;
    for (int h = 0; h < hidden_; ++h) {
      double z = b1_(h);
      for (int c = 0; c < inputs_; ++c) z += w1_(h, c) * x[c];
      out += w2_(h) * sigmoid(z);
    }
    return out;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd act = hidden_activations(x);
    return (act * w2_).array() + b2_;
  }

  // mean((f - y)^2) + ridge * (|W1|^2 + |w2|^2); gradient packed like parameters().
  double loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                           std::vector<double>* gradient) const {
    const double n = static_cast<double>(x.rows());
    const Eigen::MatrixXd act = hidden_activations(x);
    const Eigen::VectorXd resid = ((act * w2_).array() + b2_).matrix() - y;
    const double loss = resid.squaredNorm() / n + ridge * (w1_.squaredNorm() + w2_.squaredNorm());
    if (gradient) {
      const Eigen::VectorXd r = (2.0 / n) * resid;
      const Eigen::VectorXd g_w2 = act.transpose() * r + 2.0 * ridge * w2_;
      const double g_b2 = r.sum();
      const Eigen::MatrixXd dz = ((r * w2_.transpose()).array() * act.array() * (1.0 - act.array())).matrix();
      const Eigen::MatrixXd g_w1 = dz.transpose() * x + 2.0 * ridge * w1_;
      const Eigen::VectorXd g_b1 = dz.colwise().sum().transpose();
      gradient->clear();
      gradient->reserve(parameter_count());
      for (Eigen::Index rr = 0; rr < g_w1.rows(); ++rr)
        for (Eigen::Index c = 0; c < g_w1.cols(); ++c) gradient->push_back(g_w1(rr, c));
      for (Eigen::Index rr = 0; rr < g_b1.size(); ++rr) gradient->push_back(g_b1(rr));
      for (Eigen::Index rr = 0; rr < g_w2.size(); ++rr) gradient->push_back(g_w2(rr));
      gradient->push_back(g_b2);
    }
    return loss;
  }

 private:
  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  Eigen::MatrixXd hidden_activations(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z = x * w1_.transpose();
    z.rowwise() += b1_.transpose();
    return z.unaryExpr([](double v) { return sigmoid(v); });
  }

  int inputs_ = 0, hidden_ = 0;
  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_, w2_;
  double b2_ = 0.0;
};

struct TrainingSummary {
  double initial_loss = 0.0;  // training loss before the first step
  double final_loss = 0.0;    // training loss of the returned parameters
  int epochs = 0;
  bool reverted = false;      // training ended above the initial loss; initial weights kept
};

// Full-batch Adam on the penalized squared error. The step size is halved
// whenever the training loss increases. A random holdout (when the sample
// allows one) selects the returned epoch by validation error, with early
// stopping after `patience` epochs without improvement.
inline TrainingSummary train_network(ShallowNetwork& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const NetworkTraining& opt, Rng& rng) {
  const Eigen::Index n = x.rows();
  net.initialize(rng, y.mean());

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto n_val = static_cast<Eigen::Index>(std::floor(opt.validation_fraction * n));
  const bool holdout = n_val >= 10 && n - n_val >= 10;
  if (holdout)
    for (Eigen::Index k = n - 1; k > 0; --k)
      std::swap(order[k], order[static_cast<Eigen::Index>(uniform_open(rng) * double(k + 1)) % (k + 1)]);
  const Eigen::Index n_fit = holdout ? n - n_val : n;
  Eigen::MatrixXd xf(n_fit, x.cols()), xv(holdout ? n_val : 0, x.cols());
  Eigen::VectorXd yf(n_fit), yv(holdout ? n_val : 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k < n_fit) {
      xf.row(k) = x.row(order[k]);
      yf(k) = y(order[k]);
    } else {
      xv.row(k - n_fit) = x.row(order[k]);
      yv(k - n_fit) = y(order[k]);
    }
  }

  TrainingSummary summary;
  std::vector<double> theta = net.parameters(), grad, m(theta.size(), 0.0), v(theta.size(), 0.0);
  const std::vector<double> initial = theta;
  summary.initial_loss = net.loss_and_gradient(x, y, opt.ridge, nullptr);

  auto validation_error = [&] { return holdout ? (net.predict(xv) - yv).squaredNorm() / double(n_val) : 0.0; };
  std::vector<double> best = theta;
  double best_score = holdout ? validation_error() : summary.initial_loss;
  int since_best = 0;
  double lr = opt.learning_rate, prev_loss = std::numeric_limits<double>::infinity();
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double b1t = 1.0, b2t = 1.0;

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    const double loss = net.loss_and_gradient(xf, yf, opt.ridge, &grad);
    if (loss > prev_loss) lr *= 0.5;
    prev_loss = loss;
    b1t *= beta1;
    b2t *= beta2;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
      theta[k] -= lr * (m[k] / (1.0 - b1t)) / (std::sqrt(v[k] / (1.0 - b2t)) + eps);
    }
    net.set_parameters(theta);
    summary.epochs = epoch;

    const double score = holdout ? validation_error() : net.loss_and_gradient(xf, yf, opt.ridge, nullptr);
    if (score < best_score) {
      best_score = score;
      best = theta;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
    if (lr < 1e-8) break;
  }

  net.set_parameters(best);
  summary.final_loss = net.loss_and_gradient(x, y, opt.ridge, nullptr);
  if (summary.final_loss > summary.initial_loss) {
    net.set_parameters(initial);
    summary.final_loss = summary.initial_loss;
    summary.reverted = true;
  }
  return summary;
}

}  // namespace pmc
