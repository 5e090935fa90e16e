#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <memory>
#include <vector>

#include "pmc/criterion.hpp"
#include "pmc/error.hpp"
#include "pmc/index.hpp"
#include "pmc/simlab/dgp.hpp"
#include "pmc/simlab/quadrature.hpp"

namespace pmc {

// Logit probability of product j given systematic utilities u (outside option at 0 if present).
// Written as 1 / sum_k exp(u_k - u_j) so that the computed value is monotone in
// each u_k: lowering u_j and raising the others can never raise it, even in
// floating point.
inline double logit_probability(std::span<const double> u, int j, bool outside) {
  double s = outside ? std::exp(-u[j]) : 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += k == std::size_t(j) ? 1.0 : std::exp(u[k] - u[j]);
  return 1.0 / s;
}

// gamma_j(Xbar, Xlow) = softmax_j(Xbar b) - softmax_j(Xlow b) for the fixed-effect-free
// logit design; exact to floating point.
inline GammaFunction oracle_gamma(const DgpConfig& cfg, std::vector<double> beta = {}) {
  if (cfg.design != Design::oracle_logit)
    throw ValidationError(std::string("oracle gamma needs the oracle-logit design; the ") + to_string(cfg.design) +
                          " design has fixed effects, estimate gamma with fit_gamma instead");
  if (beta.empty()) beta = cfg.beta();
  if (static_cast<int>(beta.size()) != cfg.d) throw ValidationError("oracle beta has the wrong dimension");
  const int J = cfg.j, D = cfg.d;
  const bool outside = cfg.resolved_outside();
  return [beta = std::move(beta), J, D, outside](int j, PeriodPair, std::span<const double> row) {
    const std::size_t jd = std::size_t(J) * D;
    std::vector<double> now(J), then(J);
    for (int k = 0; k < J; ++k) {
      now[k] = product_index(row.subspan(0, jd), k, beta);
      then[k] = product_index(row.subspan(jd, jd), k, beta);
    }
    return logit_probability(now, j, outside) - logit_probability(then, j, outside);
  };
}

// True gamma for the scale-location designs: the logit probability difference
// integrated over the fixed effects given both periods' covariates. A_i0 and
// the independent location effects use their uniform priors; Z_i uses its
// posterior given the 2J observed X2 values.
class ConditionalGamma {
 public:
  explicit ConditionalGamma(const DgpConfig& cfg) : cfg_(cfg), beta_(cfg.beta()) {
    cfg.validate();
    if (!scale_location_design(cfg.design))
      throw ValidationError(std::string("no conditional gamma for the ") + to_string(cfg.design) + " design");
    const auto a0 = uniform_rule(8, 2.0, 2.5);
    const auto loc = uniform_rule(6, -0.25, 0.25);
    const int extra = std::max(0, cfg.j - 2);
    std::vector<int> digit(extra, 0);
    for (std::size_t p = 0; p < a0.nodes.size(); ++p)
      for (;;) {
        Node n{a0.nodes[p], a0.weights[p], std::vector<double>(extra)};
        for (int e = 0; e < extra; ++e) {
          n.loc[e] = loc.nodes[digit[e]];
          n.weight *= loc.weights[digit[e]];
        }
        nodes_.push_back(std::move(n));
        int e = 0;
        while (e < extra && ++digit[e] == static_cast<int>(loc.nodes.size())) digit[e++] = 0;
        if (e == extra) break;
      }
    standard_ = normal_rule(32, 0.0, 1.0);
    unit_ = uniform_rule(32, -1.0, 1.0);
  }

  // gamma_j for every product j at the stacked row [X_t, X_s].
  std::vector<double> all(std::span<const double> row) const {
    const int J = cfg_.j, D = cfg_.d;
    const std::size_t jd = std::size_t(J) * D;
    std::vector<double> zs, zw;
    posterior(row, zs, zw);
    std::vector<double> idx_now(J), idx_then(J), u(J), g(J, 0.0);
    for (int k = 0; k < J; ++k) {
      idx_now[k] = product_index(row.subspan(0, jd), k, beta_);
      idx_then[k] = product_index(row.subspan(jd, jd), k, beta_);
    }
    std::vector<double> p_now(J), p_then(J);
    for (const auto& n : nodes_)
      for (std::size_t q = 0; q < zs.size(); ++q) {
        const double a2 = std::max(zs[q], 0.0);
        auto probs = [&](const std::vector<double>& idx, std::vector<double>& p) {
          double top = -INFINITY;
          for (int k = 0; k < J; ++k) {
            const double a = k == 0 ? 0.0 : k == 1 ? a2 : n.loc[k - 2];
            u[k] = n.a0 * (idx[k] + a);
            top = std::max(top, u[k]);
          }
          double den = 0.0;
          for (int k = 0; k < J; ++k) den += (p[k] = std::exp(u[k] - top));
          for (int k = 0; k < J; ++k) p[k] /= den;
        };
        probs(idx_now, p_now);
        probs(idx_then, p_then);
        const double w = n.weight * zw[q];
        for (int k = 0; k < J; ++k) g[k] += w * (p_now[k] - p_then[k]);
      }
    return g;
  }

  double operator()(int j, PeriodPair, std::span<const double> row) const { return all(row)[j]; }

 private:
  struct Node {
    double a0, weight;
    std::vector<double> loc;  // A_ij for j >= 2
  };

  void posterior(std::span<const double> row, std::vector<double>& zs, std::vector<double>& zw) const {
    const int J = cfg_.j, D = cfg_.d;
    const std::size_t jd = std::size_t(J) * D;
    double sum = 0.0, lo = -detail::sqrt3, hi = detail::sqrt3;
    for (int half = 0; half < 2; ++half)
      for (int k = 0; k < J; ++k) {
        const double v = row[half * jd + std::size_t(k) * D + 1];
        sum += v;
        lo = std::max(lo, v - detail::sqrt6);
        hi = std::min(hi, v + detail::sqrt6);
      }
    switch (cfg_.design) {
      case Design::baseline:
      case Design::varying: {
        const double var = detail::w_variance(cfg_);
        const double prec = 1.0 + 2.0 * J / var, mean = sum / var / prec, sd = 1.0 / std::sqrt(prec);
        for (std::size_t q = 0; q < standard_.nodes.size(); ++q) {
          zs.push_back(mean + sd * standard_.nodes[q]);
          zw.push_back(standard_.weights[q]);
        }
        return;
      }
      case Design::point_id: {
        // Likelihood in z is N(mean of X2, 6 / 2J); prior uniform on [-sqrt3, sqrt3].
        const double m = sum / (2.0 * J), v = 6.0 / (2.0 * J);
        double total = 0.0;
        for (std::size_t q = 0; q < unit_.nodes.size(); ++q) {
          const double z = detail::sqrt3 * unit_.nodes[q];
          const double w = unit_.weights[q] * std::exp(-0.5 * (z - m) * (z - m) / v);
          zs.push_back(z);
          zw.push_back(w);
          total += w;
        }
        if (!(total > 0.0)) {
          zs.assign(1, std::clamp(m, -detail::sqrt3, detail::sqrt3));
          zw.assign(1, 1.0);
          return;
        }
        for (double& w : zw) w /= total;
        return;
      }
      case Design::partial_id:
        if (!(hi > lo)) hi = lo = 0.5 * (lo + hi);
        for (std::size_t q = 0; q < unit_.nodes.size(); ++q) {
          zs.push_back(0.5 * (lo + hi) + 0.5 * (hi - lo) * unit_.nodes[q]);
          zw.push_back(unit_.weights[q]);
        }
        return;
      default:
        return;
    }
  }

  DgpConfig cfg_;
  std::vector<double> beta_;
  std::vector<Node> nodes_;
  QuadratureRule standard_, unit_;
};

// The true gamma of a simulated design: closed form without fixed effects,
// quadrature for the scale-location designs.
inline GammaFunction true_gamma(const DgpConfig& cfg) {
  if (cfg.design == Design::oracle_logit) return oracle_gamma(cfg);
  return [g = std::make_shared<ConditionalGamma>(cfg)](int j, PeriodPair p, std::span<const double> row) {
    return (*g)(j, p, row);
  };
}

// Mean over agents, selected ordered pairs and products of (G(gamma_hat) - G(gamma))^2,
// for each smoother kind (indicator, positive part, adjusted normal CDF).
// `truth` returns gamma_j for all products at a stacked row.
inline std::array<double, 3> first_stage_mse(const PanelDataset& data, const GammaFunction& estimate,
                                             const std::function<std::vector<double>(std::span<const double>)>& truth,
                                             const std::vector<PeriodPair>& pairs) {
  const std::size_t width = 2 * std::size_t(data.n_products()) * data.n_covariates();
  std::vector<double> row(width);
  std::array<double, 3> sse{};
  std::size_t count = 0;
  for (int i = 0; i < data.n_agents(); ++i)
    for (const auto& p : pairs)
      for (const PeriodPair ord : {p, p.reversed()}) {
        stack_row(data, i, ord, row);
        const auto g = truth(row);
        for (int j = 0; j < data.n_products(); ++j) {
          const double e = estimate(j, ord, row);
          for (int k = 0; k < 3; ++k) {
            const Smoother s{static_cast<SmootherKind>(k)};
            const double d = s(e) - s(g[j]);
            sse[k] += d * d;
          }
          ++count;
        }
      }
  for (double& v : sse) v = count ? v / double(count) : 0.0;
  return sse;
}

}  // namespace pmc
