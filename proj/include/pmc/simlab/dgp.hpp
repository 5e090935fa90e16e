#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pmc/error.hpp"
#include "pmc/index.hpp"
#include "pmc/panel.hpp"
#include "pmc/rng.hpp"

namespace pmc {

enum class Design { baseline, varying, point_id, partial_id, multiplicative_fe, oracle_logit };

inline const char* to_string(Design d) {
  switch (d) {
    case Design::baseline: return "baseline";
    case Design::varying: return "varying";
    case Design::point_id: return "point-id";
    case Design::partial_id: return "partial-id";
    case Design::multiplicative_fe: return "multiplicative-fe";
    case Design::oracle_logit: return "oracle-logit";
  }
  return "?";
}

inline Design parse_design(const std::string& s) {
  for (Design d : {Design::baseline, Design::varying, Design::point_id, Design::partial_id, Design::multiplicative_fe,
                   Design::oracle_logit})
    if (s == to_string(d)) return d;
  throw ValidationError("unknown design '" + s +
                        "' (expected baseline|varying|point-id|partial-id|multiplicative-fe|oracle-logit)");
}

// Designs with A_i0 (A_ij + X'b) utilities and a latent Z_i shared across products.
inline bool scale_location_design(Design d) {
  return d == Design::baseline || d == Design::varying || d == Design::point_id || d == Design::partial_id;
}

struct DgpConfig {
  Design design = Design::baseline;
  int n = 1000, d = 3, j = 3, t = 2;
  std::vector<double> beta_true;  // empty: design default
  double alpha_mix = 0.3;         // multiplicative-fe only
  std::uint64_t seed = 1;
  // Outcomes: realized choices, or exact logit probabilities given (X, A) as market shares.
  std::optional<OutcomeKind> outcome;  // empty: shares for multiplicative-fe, binary otherwise
  std::optional<bool> outside_option;  // empty: true for multiplicative-fe, false otherwise

  OutcomeKind resolved_outcome() const {
    return outcome.value_or(design == Design::multiplicative_fe ? OutcomeKind::shares : OutcomeKind::binary);
  }
  bool resolved_outside() const { return outside_option.value_or(design == Design::multiplicative_fe); }

  std::vector<double> beta() const {
    if (!beta_true.empty()) return beta_true;
    if (design == Design::multiplicative_fe) return {-4.0, 2.0, 2.0};
    std::vector<double> b(d, 1.0);
    b[0] = 2.0;
    return b;
  }

  void validate() const {
    if (n < 1) throw ValidationError("n must be positive");
    if (t < 2) throw ValidationError("t must be at least 2");
    if (j < 2 && !resolved_outside()) throw ValidationError("j must be at least 2 without an outside option");
    if (j < 1) throw ValidationError("j must be positive");
    if (d < 2) throw ValidationError("d must be at least 2");
    const auto b = beta();
    if (static_cast<int>(b.size()) != d)
      throw ValidationError("beta has " + std::to_string(b.size()) + " entries, expected d = " + std::to_string(d));
    double norm = 0.0;
    for (double v : b) norm += v * v;
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError("beta must be finite and nonzero");
    switch (design) {
      case Design::baseline:
      case Design::point_id:
      case Design::partial_id:
        if (d != 3 || j != 3) throw ValidationError(std::string(to_string(design)) + " design has d = 3 and j = 3");
        break;
      case Design::varying:
        if (j < 2) throw ValidationError("varying design needs j >= 2");
        if (d < 2) throw ValidationError("varying design needs d >= 2");
        break;
      case Design::multiplicative_fe:
        if (d != 3) throw ValidationError("multiplicative-fe design has d = 3");
        if (!(alpha_mix >= 0.0 && alpha_mix <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
        break;
      case Design::oracle_logit:
        break;
    }
    if (scale_location_design(design) && resolved_outside())
      throw ValidationError(std::string(to_string(design)) + " design has no outside option");
  }
};

// Unobservables kept apart from the estimator path.
struct SimulationTruth {
  std::vector<double> beta;        // as used in utilities
  std::vector<double> beta_unit;   // normalized to the sphere
  std::vector<double> a0;          // N (scale effect; 1 where absent)
  std::vector<double> a;           // N x J (location or multiplicative effect)
  std::vector<double> z;           // N (shared latent) or N x J (multiplicative-fe)
  std::vector<double> epsilon;     // N x T x (J [+ 1 outside, stored last])
  int ties = 0;                    // (i, t) cells whose maximal utility is attained twice
};

struct Simulation {
  PanelDataset data;
  SimulationTruth truth;
};

inline std::vector<double> normalized(std::vector<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  for (double& x : v) x /= s;
  return v;
}

namespace detail {

constexpr double sqrt3 = 1.7320508075688772;
constexpr double sqrt6 = 2.449489742783178;

// Variance of the noise W in X2 = Z + W.
inline double w_variance(const DgpConfig& cfg) {
  return cfg.design == Design::baseline ? 2.0 * cfg.j : 6.0;
}

}  // namespace detail

// Draws one panel. Per agent: latent effects, then per period and product the
// covariates, then the utility shocks. Deterministic in cfg.seed.
inline Simulation simulate(const DgpConfig& cfg) {
  cfg.validate();
  const int N = cfg.n, J = cfg.j, T = cfg.t, D = cfg.d;
  const bool outside = cfg.resolved_outside();
  const OutcomeKind kind = cfg.resolved_outcome();
  const int alts = J + (outside ? 1 : 0);
  const auto beta = cfg.beta();
  Rng rng(cfg.seed);

  SimulationTruth truth;
  truth.beta = beta;
  truth.beta_unit = normalized(beta);
  truth.a0.assign(N, 1.0);
  truth.a.assign(std::size_t(N) * J, 0.0);
  truth.z.assign(cfg.design == Design::multiplicative_fe ? std::size_t(N) * J : std::size_t(N), 0.0);
  truth.epsilon.resize(std::size_t(N) * T * alts);
  std::vector<double> x(std::size_t(N) * T * J * D), y(std::size_t(N) * T * J, 0.0);
  const double w_sd = std::sqrt(detail::w_variance(cfg));

  std::vector<double> u(alts);
  for (int i = 0; i < N; ++i) {
    double* ai = &truth.a[std::size_t(i) * J];
    switch (cfg.design) {
      case Design::baseline:
      case Design::varying:
      case Design::point_id:
      case Design::partial_id: {
        const double z = cfg.design == Design::baseline || cfg.design == Design::varying
                             ? standard_normal(rng)
                             : uniform(rng, -detail::sqrt3, detail::sqrt3);
        truth.z[i] = z;
        truth.a0[i] = uniform(rng, 2.0, 2.5);
        for (int j = 0; j < J; ++j) ai[j] = j == 0 ? 0.0 : j == 1 ? std::max(z, 0.0) : uniform(rng, -0.25, 0.25);
        break;
      }
      case Design::multiplicative_fe:
        for (int j = 0; j < J; ++j) {
          truth.z[std::size_t(i) * J + j] = uniform_open(rng);
          ai[j] = truth.z[std::size_t(i) * J + j] + 1.0;
        }
        break;
      case Design::oracle_logit:
        break;
    }

    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < J; ++j) {
        double* xv = &x[((std::size_t(i) * T + t) * J + j) * D];
        switch (cfg.design) {
          case Design::baseline:
          case Design::varying:
            xv[0] = uniform(rng, -1.0, 1.0);
            xv[1] = truth.z[i] + w_sd * standard_normal(rng);
            for (int d = 2; d < D; ++d) xv[d] = standard_normal(rng);
            break;
          case Design::point_id:
            xv[0] = uniform(rng, -1.0, 1.0);
            xv[1] = truth.z[i] + detail::sqrt6 * standard_normal(rng);
            xv[2] = standard_normal(rng);
            break;
          case Design::partial_id:
            xv[0] = uniform_open(rng) < 0.5 ? -1.0 : 1.0;
            xv[1] = truth.z[i] + uniform(rng, -detail::sqrt6, detail::sqrt6);
            xv[2] = uniform(rng, -1.0, 1.0);
            break;
          case Design::multiplicative_fe: {
            const double z = truth.z[std::size_t(i) * J + j];
            xv[0] = uniform(rng, 0.0, 4.0);
            xv[1] = (1.0 - cfg.alpha_mix) * uniform_open(rng) + cfg.alpha_mix * z;
            xv[2] = xv[0] * xv[1];
            break;
          }
          case Design::oracle_logit:
            for (int d = 0; d < D; ++d) xv[d] = standard_normal(rng);
            break;
        }
      }
      // Systematic utilities, then shocks.
      for (int j = 0; j < J; ++j) {
        const double idx = product_index(
            std::span<const double>(&x[(std::size_t(i) * T + t) * J * D], std::size_t(J) * D), j, beta);
        switch (cfg.design) {
          case Design::multiplicative_fe: u[j] = ai[j] * idx; break;
          case Design::oracle_logit: u[j] = idx; break;
          default: u[j] = truth.a0[i] * (idx + ai[j]); break;
        }
      }
      if (outside) u[J] = 0.0;
      double* eps = &truth.epsilon[(std::size_t(i) * T + t) * alts];
      for (int k = 0; k < alts; ++k) eps[k] = gumbel(rng);

      double* yv = &y[(std::size_t(i) * T + t) * J];
      if (kind == OutcomeKind::shares) {
        double top = u[0];
        for (int k = 1; k < alts; ++k) top = std::max(top, u[k]);
        double den = 0.0;
        for (int k = 0; k < alts; ++k) den += std::exp(u[k] - top);
        for (int j = 0; j < J; ++j) yv[j] = std::exp(u[j] - top) / den;
      } else {
        int best = 0;
        double best_u = u[0] + eps[0];
        int count = 1;
        for (int k = 1; k < alts; ++k) {
          const double v = u[k] + eps[k];
          if (v > best_u) {
            best = k;
            best_u = v;
            count = 1;
          } else if (v == best_u) {
            ++count;
          }
        }
        if (count > 1) ++truth.ties;
        if (best < J) yv[best] = 1.0;
      }
    }
  }
  return {PanelDataset(N, J, T, D, std::move(x), std::move(y), kind, outside), std::move(truth)};
}

}  // namespace pmc
