#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmc/criterion.hpp"
#include "pmc/error.hpp"
#include "pmc/first_stage/kernel.hpp"
#include "pmc/first_stage/network.hpp"
#include "pmc/first_stage/standardizer.hpp"
#include "pmc/panel.hpp"
#include "pmc/parallel.hpp"
#include "pmc/rng.hpp"

namespace pmc {

enum class RegressorKind { network, kernel };

inline const char* to_string(RegressorKind k) { return k == RegressorKind::network ? "network" : "kernel"; }

inline RegressorKind parse_regressor(const std::string& name) {
  if (name == "network") return RegressorKind::network;
  if (name == "kernel") return RegressorKind::kernel;
  throw ValidationError("unknown regressor '" + name + "' (expected network|kernel)");
}

struct RegressorSpec {
  RegressorKind kind = RegressorKind::network;
  int hidden_units = 8;
  double ridge = 1e-4;
  double bandwidth = 1.0;  // kernel: multiplier on the rule-of-thumb bandwidth
  int cv_folds = 5;
  int max_epochs = 1500;
  double learning_rate = 0.02;
  int patience = 100;
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
  // One regressor per product shared by all selected pairs, trained on both
  // orientations of every pair. Assumes the differences are time homogeneous.
  bool pooled_pairs = false;
  unsigned jobs = 1;

  void validate() const {
    if (hidden_units < 1) throw ValidationError("hidden_units must be positive");
    if (!(ridge >= 0.0)) throw ValidationError("ridge must be nonnegative");
    if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
    if (cv_folds < 2) throw ValidationError("cv_folds must be at least 2");
    if (max_epochs < 0) throw ValidationError("max_epochs must be nonnegative");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (patience < 1) throw ValidationError("patience must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw ValidationError("validation_fraction must lie in [0, 1)");
  }

  NetworkTraining training() const { return {max_epochs, learning_rate, patience, validation_fraction, ridge}; }
};

// A fitted scalar regression R^p -> R (unclipped), including its input standardization.
class FittedRegressor {
 public:
  enum class Kind { constant, network, kernel };

  static FittedRegressor fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RegressorSpec& spec, Rng& rng) {
    if (x.rows() == 0 || x.rows() != y.size()) throw ValidationError("regression needs matching, nonempty data");
    FittedRegressor f;
    f.inputs_ = static_cast<int>(x.cols());
    const double mean = y.mean();
    if ((y.array() - mean).abs().maxCoeff() == 0.0) {
      f.kind_ = Kind::constant;
      f.constant_ = mean;
      f.degenerate_ = true;
      return f;
    }
    f.standardizer_ = Standardizer::fit(x);
    const Eigen::MatrixXd z = f.standardizer_.apply(x);
    if (spec.kind == RegressorKind::network) {
      f.kind_ = Kind::network;
      f.net_ = ShallowNetwork(f.inputs_, spec.hidden_units);
      f.training_ = train_network(f.net_, z, y, spec.training(), rng);
    } else {
      f.kind_ = Kind::kernel;
      f.kernel_ = KernelRegressor(z, y, spec.bandwidth);
    }
    double sse = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::VectorXd row = x.row(i).transpose();
      const double d = f.predict(std::span<const double>(row.data(), row.size())) - y(i);
      sse += d * d;
    }
    f.train_mse_ = sse / double(x.rows());
    return f;
  }

  static FittedRegressor constant(int inputs, double value, bool degenerate) {
    FittedRegressor f;
    f.inputs_ = inputs;
    f.kind_ = Kind::constant;
    f.constant_ = value;
    f.degenerate_ = degenerate;
    return f;
  }

  static FittedRegressor from_network(Standardizer s, ShallowNetwork net) {
    FittedRegressor f;
    f.inputs_ = net.inputs();
    f.kind_ = Kind::network;
    f.standardizer_ = std::move(s);
    f.net_ = std::move(net);
    return f;
  }

  static FittedRegressor from_kernel(Standardizer s, KernelRegressor k) {
    FittedRegressor f;
    f.inputs_ = static_cast<int>(k.points().cols());
    f.kind_ = Kind::kernel;
    f.standardizer_ = std::move(s);
    f.kernel_ = std::move(k);
    return f;
  }

  double predict(std::span<const double> row) const {
    if (kind_ == Kind::constant) return constant_;
    std::array<double, 256> small{};
    std::vector<double> big;
    std::span<double> z;
    if (row.size() <= small.size()) {
      z = std::span<double>(small.data(), row.size());
    } else {
      big.resize(row.size());
      z = big;
    }
    standardizer_.apply(row, z);
    return kind_ == Kind::network ? net_.predict(z) : kernel_.predict(z);
  }

  Kind kind() const noexcept { return kind_; }
  int inputs() const noexcept { return inputs_; }
  bool degenerate() const noexcept { return degenerate_; }
  double constant_value() const noexcept { return constant_; }
  double train_mse() const noexcept { return train_mse_; }
  const TrainingSummary& training() const noexcept { return training_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const ShallowNetwork& network() const noexcept { return net_; }
  const KernelRegressor& kernel() const noexcept { return kernel_; }

 private:
  Kind kind_ = Kind::constant;
  int inputs_ = 0;
  double constant_ = 0.0;
  bool degenerate_ = false;
  double train_mse_ = 0.0;
  TrainingSummary training_{};
  Standardizer standardizer_;
  ShallowNetwork net_;
  KernelRegressor kernel_;
};

struct FitReport {
  int product = 0;
  PeriodPair pair{};  // meaningless for pooled fits
  double train_mse = 0.0;
  bool degenerate = false;  // constant-mean fallback on a zero-variance target
  bool reverted = false;    // training did not improve on initialization
  int epochs = 0;
};

// First-stage convergence rate c_N = (log N / N)^{(1 + 2/(d+1)) / (4 (1 + 1/(d+1)))}
// for d regressors. Reported only.
inline double first_stage_rate(double n, int d) {
  const double a = 1.0 / (d + 1.0);
  return std::pow(std::log(n) / n, (1.0 + 2.0 * a) / (4.0 * (1.0 + a)));
}

inline double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// Row [X_t, X_s] -> [X_s, X_t].
inline void swap_periods(std::span<const double> row, std::span<double> out) {
  const std::size_t half = row.size() / 2;
  std::copy(row.begin() + half, row.end(), out.begin());
  std::copy(row.begin(), row.begin() + half, out.begin() + half);
}

// First-stage estimates of gamma_{j,t,s}. Fitted regressors cover the unordered
// pairs (t < s); the reversed orientation is the negated prediction on the
// swapped row. Without an outside option the last product is derived as minus
// the sum over the others. Predictions are clipped to [-1, 1].
class GammaEstimates {
 public:
  GammaEstimates() = default;
  GammaEstimates(int n_products, int n_covariates, bool outside_option, bool pooled, std::vector<PeriodPair> pairs,
                 std::vector<FittedRegressor> models, RegressorSpec spec, std::vector<FitReport> reports = {})
      : j_(n_products),
        d_(n_covariates),
        outside_(outside_option),
        pooled_(pooled),
        pairs_(std::move(pairs)),
        models_(std::move(models)),
        spec_(spec),
        reports_(std::move(reports)) {
    if (models_.size() != std::size_t(fitted_products()) * (pooled_ ? 1 : pairs_.size()))
      throw ValidationError("model count does not match products and pairs");
  }

  int n_products() const noexcept { return j_; }
  int n_covariates() const noexcept { return d_; }
  bool outside_option() const noexcept { return outside_; }
  bool pooled() const noexcept { return pooled_; }
  const std::vector<PeriodPair>& pairs() const noexcept { return pairs_; }
  const std::vector<FittedRegressor>& models() const noexcept { return models_; }
  const RegressorSpec& spec() const noexcept { return spec_; }
  const std::vector<FitReport>& reports() const noexcept { return reports_; }

  // Products with their own regressor; the rest are derived.
  int fitted_products() const noexcept { return outside_ ? j_ : j_ - 1; }

  double predict(int j, PeriodPair pair, std::span<const double> row) const {
    if (j < 0 || j >= j_) throw ValidationError("product index " + std::to_string(j) + " out of range");
    if (row.size() != std::size_t(2) * j_ * d_) throw ValidationError("stacked row has the wrong length");
    return clip_unit(raw(j, pair, row));
  }

  // Closure for the criterion; the estimates must outlive it.
  GammaFunction function() const {
    return [this](int j, PeriodPair pair, std::span<const double> row) { return predict(j, pair, row); };
  }

 private:
  double raw(int j, PeriodPair pair, std::span<const double> row) const {
    if (j == fitted_products()) {
      double s = 0.0;
      for (int k = 0; k < j; ++k) s += raw(k, pair, row);
      return -s;
    }
    const bool forward = pair.t < pair.s;
    const PeriodPair key = forward ? pair : pair.reversed();
    std::size_t slot = 0;
    if (!pooled_) {
      const auto it = std::find(pairs_.begin(), pairs_.end(), key);
      if (it == pairs_.end())
        throw ValidationError("no first-stage estimate for pair (" + std::to_string(pair.t) + ", " +
                              std::to_string(pair.s) + ")");
      slot = std::size_t(it - pairs_.begin());
    }
    const auto& model = models_[slot * fitted_products() + j];
    if (forward) return model.predict(row);
    std::array<double, 256> small{};
    std::vector<double> big;
    std::span<double> swapped;
    if (row.size() <= small.size()) {
      swapped = std::span<double>(small.data(), row.size());
    } else {
      big.resize(row.size());
      swapped = big;
    }
    swap_periods(row, swapped);
    return -model.predict(swapped);
  }

  int j_ = 0, d_ = 0;
  bool outside_ = false, pooled_ = false;
  std::vector<PeriodPair> pairs_;
  std::vector<FittedRegressor> models_;
  RegressorSpec spec_;
  std::vector<FitReport> reports_;
};

namespace detail {

struct RegressionTarget {
  int product;
  int pair_slot;  // -1: pooled over all pairs
};

inline std::vector<RegressionTarget> regression_targets(int fitted, std::size_t n_pairs, bool pooled) {
  std::vector<RegressionTarget> out;
  if (pooled) {
    for (int j = 0; j < fitted; ++j) out.push_back({j, -1});
  } else {
    for (std::size_t p = 0; p < n_pairs; ++p)
      for (int j = 0; j < fitted; ++j) out.push_back({j, static_cast<int>(p)});
  }
  return out;
}

// Design and response for a target, restricted to `agents`.
inline void regression_data(const PanelDataset& data, const std::vector<PeriodPair>& pairs, RegressionTarget target,
                            std::span<const int> agents, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  const std::size_t width = 2 * std::size_t(data.n_products()) * data.n_covariates();
  std::vector<PeriodPair> orientations;
  if (target.pair_slot >= 0) {
    orientations.push_back(pairs[target.pair_slot]);
  } else {
    for (const auto& p : pairs) {
      orientations.push_back(p);
      orientations.push_back(p.reversed());
    }
  }
  const auto rows = static_cast<Eigen::Index>(agents.size() * orientations.size());
  x.resize(rows, static_cast<Eigen::Index>(width));
  y.resize(rows);
  std::vector<double> row(width);
  Eigen::Index r = 0;
  for (const auto& ord : orientations)
    for (int i : agents) {
      stack_row(data, i, ord, row);
      for (std::size_t c = 0; c < width; ++c) x(r, static_cast<Eigen::Index>(c)) = row[c];
      y(r) = data.outcome(i, target.product, ord.t) - data.outcome(i, target.product, ord.s);
      ++r;
    }
}

}  // namespace detail

// Fits one regressor per (product, unordered pair), or per product when pooled.
// Deterministic given spec.seed, whatever spec.jobs is.
inline GammaEstimates fit_gamma(const PanelDataset& data, const RegressorSpec& spec, const PairPolicy& policy = {}) {
  spec.validate();
  const auto pairs = select_pairs(data.n_periods(), policy);
  const int fitted = data.outside_option() ? data.n_products() : data.n_products() - 1;
  const auto targets = detail::regression_targets(fitted, pairs.size(), spec.pooled_pairs);
  std::vector<int> agents(data.n_agents());
  std::iota(agents.begin(), agents.end(), 0);

  std::vector<FittedRegressor> models(targets.size());
  std::vector<FitReport> reports(targets.size());
  parallel_for(targets.size(), spec.jobs, [&](std::size_t k) {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    detail::regression_data(data, pairs, targets[k], agents, x, y);
    Rng rng(derive_seed(spec.seed, k));
    models[k] = FittedRegressor::fit(x, y, spec, rng);
    const auto& m = models[k];
    reports[k] = {targets[k].product, targets[k].pair_slot >= 0 ? pairs[targets[k].pair_slot] : PeriodPair{},
                  m.train_mse(), m.degenerate(), m.training().reverted, m.training().epochs};
  });
  return GammaEstimates(data.n_products(), data.n_covariates(), data.outside_option(), spec.pooled_pairs, pairs,
                        std::move(models), spec, std::move(reports));
}

struct CvResult {
  RegressorSpec best;
  std::vector<double> scores;  // mean validation MSE per grid element
  std::size_t best_index = 0;
};

// Relative tolerance within which validation scores count as tied.
inline constexpr double cv_tie_tolerance = 0.01;

// k-fold cross-validation over agents. Scores average the held-out MSE over
// folds and fitted targets. Among specs within cv_tie_tolerance of the best
// score, the most regularized wins: fewer hidden units, then larger ridge,
// then larger bandwidth, then grid order.
inline CvResult cross_validate(const PanelDataset& data, const std::vector<RegressorSpec>& grid,
                               const PairPolicy& policy = {}) {
  if (grid.empty()) throw ValidationError("cross-validation grid is empty");
  for (const auto& s : grid) s.validate();
  const int folds = std::min(grid.front().cv_folds, data.n_agents());
  if (folds < 2) throw ValidationError("cross-validation needs at least two agents");
  const auto pairs = select_pairs(data.n_periods(), policy);
  const int fitted = data.outside_option() ? data.n_products() : data.n_products() - 1;

  // Seeded fold assignment shared by all grid elements.
  std::vector<int> perm(data.n_agents());
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle(derive_seed(grid.front().seed, 0xc5));
  for (std::size_t k = perm.size() - 1; k > 0; --k)
    std::swap(perm[k], perm[static_cast<std::size_t>(uniform_open(shuffle) * double(k + 1)) % (k + 1)]);
  std::vector<std::vector<int>> fold_agents(folds);
  for (std::size_t k = 0; k < perm.size(); ++k) fold_agents[k % folds].push_back(perm[k]);
  for (auto& f : fold_agents) std::sort(f.begin(), f.end());

  CvResult result;
  result.scores.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& spec = grid[g];
    const auto targets = detail::regression_targets(fitted, pairs.size(), spec.pooled_pairs);
    std::vector<double> mse(targets.size() * folds, 0.0);
    parallel_for(mse.size(), spec.jobs, [&](std::size_t k) {
      const auto target = targets[k / folds];
      const int fold = static_cast<int>(k % folds);
      std::vector<int> train;
      for (int f = 0; f < folds; ++f)
        if (f != fold) train.insert(train.end(), fold_agents[f].begin(), fold_agents[f].end());
      std::sort(train.begin(), train.end());
      Eigen::MatrixXd xt, xv;
      Eigen::VectorXd yt, yv;
      detail::regression_data(data, pairs, target, train, xt, yt);
      detail::regression_data(data, pairs, target, fold_agents[fold], xv, yv);
      Rng rng(derive_seed(spec.seed, k));
      const auto model = FittedRegressor::fit(xt, yt, spec, rng);
      double sse = 0.0;
      for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        const Eigen::VectorXd row = xv.row(i).transpose();
        const double d = clip_unit(model.predict(std::span<const double>(row.data(), row.size()))) - yv(i);
        sse += d * d;
      }
      mse[k] = xv.rows() > 0 ? sse / double(xv.rows()) : 0.0;
    });
    result.scores[g] = mse.empty() ? 0.0 : std::accumulate(mse.begin(), mse.end(), 0.0) / double(mse.size());
  }

  const double best_score = *std::min_element(result.scores.begin(), result.scores.end());
  const double cutoff = best_score * (1.0 + cv_tie_tolerance) + 1e-15;
  std::size_t pick = grid.size();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!(result.scores[g] <= cutoff)) continue;
    if (pick == grid.size()) {
      pick = g;
      continue;
    }
    const auto& a = grid[g];
    const auto& b = grid[pick];
    const bool better = a.hidden_units != b.hidden_units ? a.hidden_units < b.hidden_units
                        : a.ridge != b.ridge             ? a.ridge > b.ridge
                                                         : a.bandwidth > b.bandwidth;
    if (better) pick = g;
  }
  result.best_index = pick;
  result.best = grid[pick];
  return result;
}

// Default hyperparameter grid: hidden units {4, 8, 16} x ridge {0, 1e-4, 1e-2}.
inline std::vector<RegressorSpec> default_cv_grid(const RegressorSpec& base) {
  std::vector<RegressorSpec> grid;
  for (int h : {4, 8, 16})
    for (double r : {0.0, 1e-4, 1e-2}) {
      RegressorSpec s = base;
      s.kind = RegressorKind::network;
      s.hidden_units = h;
      s.ridge = r;
      grid.push_back(s);
    }
  return grid;
}

}  // namespace pmc
