#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pmc/simlab/config.hpp"
#include "pmc/simlab/mc.hpp"

using namespace pmc;

namespace {

DgpConfig oracle_cfg(int n, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.design = Design::oracle_logit;
  cfg.n = n;
  cfg.seed = seed;
  return cfg;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k] / n;
    mb += b[k] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Quadrature, UniformRuleIsExactForPolynomials) {
  const auto rule = uniform_rule(8, -1.0, 3.0);
  double total = 0.0;
  for (double w : rule.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-14);
  for (int k = 0; k <= 15; ++k) {
    double q = 0.0;
    for (std::size_t p = 0; p < rule.nodes.size(); ++p) q += rule.weights[p] * std::pow(rule.nodes[p], k);
    const double exact = (std::pow(3.0, k + 1) - std::pow(-1.0, k + 1)) / (4.0 * (k + 1));
    EXPECT_NEAR(q, exact, 1e-11 * std::max(1.0, std::abs(exact))) << "k=" << k;
  }
}

TEST(Quadrature, NormalRuleMoments) {
  const auto rule = normal_rule(16, 1.5, 2.0);
  double m1 = 0, m2 = 0, c4 = 0;
  for (std::size_t p = 0; p < rule.nodes.size(); ++p) {
    m1 += rule.weights[p] * rule.nodes[p];
    m2 += rule.weights[p] * rule.nodes[p] * rule.nodes[p];
    c4 += rule.weights[p] * std::pow(rule.nodes[p] - 1.5, 4);
  }
  EXPECT_NEAR(m1, 1.5, 1e-12);
  EXPECT_NEAR(m2, 1.5 * 1.5 + 4.0, 1e-12);
  EXPECT_NEAR(c4, 3.0 * 16.0, 1e-10);
}

TEST(Simulate, BaselineShapeAndOneChoicePerCell) {
  DgpConfig cfg;
  cfg.n = 100;
  const auto sim = simulate(cfg);
  const auto& data = sim.data;
  EXPECT_EQ(data.n_agents(), 100);
  EXPECT_EQ(data.n_products(), 3);
  EXPECT_EQ(data.n_periods(), 2);
  EXPECT_EQ(data.n_covariates(), 3);
  for (int i = 0; i < 100; ++i)
    for (int t = 0; t < 2; ++t) {
      double sum = 0.0;
      for (int j = 0; j < 3; ++j) sum += data.outcome(i, j, t);
      EXPECT_EQ(sum, 1.0);
    }
}

TEST(Simulate, DeterministicInSeedAndFreeOfTies) {
  for (Design d : {Design::baseline, Design::varying, Design::point_id, Design::partial_id, Design::multiplicative_fe,
                   Design::oracle_logit}) {
    DgpConfig cfg;
    cfg.design = d;
    cfg.n = 300;
    cfg.seed = 17;
    if (d == Design::multiplicative_fe) cfg.outcome = OutcomeKind::binary;
    const auto a = simulate(cfg), b = simulate(cfg);
    EXPECT_EQ(a.data.covariates(), b.data.covariates()) << to_string(d);
    EXPECT_EQ(a.data.outcomes(), b.data.outcomes()) << to_string(d);
    EXPECT_EQ(a.truth.ties, 0) << to_string(d);
    cfg.seed = 18;
    EXPECT_NE(simulate(cfg).data.covariates(), a.data.covariates()) << to_string(d);
  }
}

TEST(Simulate, OracleLogitFrequenciesMatchSoftmax) {
  const auto cfg = oracle_cfg(100000, 5);
  const auto sim = simulate(cfg);
  const auto& data = sim.data;
  const auto beta = cfg.beta();
  for (int t = 0; t < 2; ++t) {
    std::vector<double> freq(3, 0.0), prob(3, 0.0);
    for (int i = 0; i < cfg.n; ++i) {
      const auto block = data.block(i, t);
      std::vector<double> u(3);
      for (int k = 0; k < 3; ++k) u[k] = product_index(block, k, beta);
      for (int j = 0; j < 3; ++j) {
        freq[j] += data.outcome(i, j, t) / cfg.n;
        prob[j] += logit_probability(u, j, false) / cfg.n;
      }
    }
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt(prob[j] * (1.0 - prob[j]) / cfg.n);
      EXPECT_LE(std::abs(freq[j] - prob[j]), 3.0 * se) << "t=" << t << " j=" << j;
    }
  }
}

TEST(Simulate, MultiplicativeFeCorrelationFollowsAlpha) {
  DgpConfig cfg;
  cfg.design = Design::multiplicative_fe;
  cfg.n = 5000;
  cfg.t = 4;
  auto corr_x2_a = [&](double alpha) {
    cfg.alpha_mix = alpha;
    const auto sim = simulate(cfg);
    std::vector<double> x2, a;
    for (int i = 0; i < cfg.n; ++i)
      for (int j = 0; j < cfg.j; ++j)
        for (int t = 0; t < cfg.t; ++t) {
          x2.push_back(sim.data.x(i, j, t, 1));
          a.push_back(sim.truth.a[std::size_t(i) * cfg.j + j]);
        }
    return correlation(x2, a);
  };
  EXPECT_LT(std::abs(corr_x2_a(0.0)), 0.03);
  EXPECT_GT(corr_x2_a(0.5), 0.5);
}

TEST(Simulate, RejectsInvalidConfigs) {
  DgpConfig cfg;
  cfg.t = 1;
  EXPECT_THROW(simulate(cfg), ValidationError);
  cfg = {};
  cfg.d = 4;
  EXPECT_THROW(simulate(cfg), ValidationError);
  cfg = {};
  cfg.beta_true = {0.0, 0.0, 0.0};
  EXPECT_THROW(simulate(cfg), ValidationError);
  cfg = {};
  cfg.outside_option = true;
  EXPECT_THROW(simulate(cfg), ValidationError);
}

TEST(OracleGamma, SoftmaxArithmetic) {
  DgpConfig cfg = oracle_cfg(10, 1);
  cfg.j = 2;
  cfg.d = 2;
  cfg.beta_true = {1.0, 0.0};
  const auto gamma = oracle_gamma(cfg);
  // Indexes (0, 0) now and (ln 3, 0) then.
  const std::vector<double> row = {0.0, 5.0, 0.0, -2.0, std::log(3.0), 1.0, 0.0, 7.0};
  EXPECT_NEAR(gamma(0, {0, 1}, row), -0.25, 1e-15);
  EXPECT_NEAR(gamma(1, {0, 1}, row), 0.25, 1e-15);
}

TEST(OracleGammaProperty, SumsToZeroAndVanishesOnEqualPeriods) {
  Rng rng(3);
  for (bool outside : {false, true}) {
    DgpConfig cfg = oracle_cfg(10, 1);
    cfg.j = 4;
    cfg.outside_option = outside;
    const auto gamma = oracle_gamma(cfg);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> row(2 * 4 * 3);
      for (double& v : row) v = 2.0 * standard_normal(rng);
      double sum = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double g = gamma(j, {0, 1}, row);
        EXPECT_LE(std::abs(g), 1.0);
        sum += g;
      }
      if (!outside) {
        EXPECT_NEAR(sum, 0.0, 1e-14);
      }
      std::copy(row.begin(), row.begin() + 12, row.begin() + 12);
      for (int j = 0; j < 4; ++j) EXPECT_EQ(gamma(j, {0, 1}, row), 0.0);
    }
  }
}

TEST(OracleGamma, RejectsFixedEffectDesigns) {
  DgpConfig cfg;
  try {
    oracle_gamma(cfg);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("fit_gamma"), std::string::npos);
  }
}

TEST(OracleGamma, CriterionIsExactlyZeroAtTruth) {
  const auto cfg = oracle_cfg(3000, 8);
  const auto sim = simulate(cfg);
  const CriterionEvaluator ev(sim.data, oracle_gamma(cfg));
  const UnitVector b0(sim.truth.beta_unit);
  EXPECT_EQ(ev(b0), 0.0);
  for (const auto& term : ev.terms(b0)) EXPECT_EQ(term.value, 0.0);
  EXPECT_EQ(ev.violations(b0), 0u);
}

TEST(ConditionalGamma, UnbiasedForRealizedShareChanges) {
  // E[y_jt - y_js | X] = gamma_j(X): residuals have mean zero, including
  // after weighting by gamma itself.
  for (Design d : {Design::baseline, Design::partial_id}) {
    DgpConfig cfg;
    cfg.design = d;
    cfg.n = 6000;
    cfg.seed = 4;
    const auto sim = simulate(cfg);
    const ConditionalGamma truth(cfg);
    std::vector<double> row(18);
    std::vector<double> resid, weighted, g_all, dy_all;
    for (int i = 0; i < cfg.n; ++i) {
      stack_row(sim.data, i, {0, 1}, row);
      const auto g = truth.all(row);
      double sum = 0.0;
      for (int j = 0; j < 3; ++j) {
        const double dy = sim.data.outcome(i, j, 0) - sim.data.outcome(i, j, 1);
        resid.push_back(dy - g[j]);
        weighted.push_back((dy - g[j]) * g[j]);
        g_all.push_back(g[j]);
        dy_all.push_back(dy);
        sum += g[j];
      }
      ASSERT_NEAR(sum, 0.0, 1e-12);
    }
    for (const auto* v : {&resid, &weighted}) {
      double m = 0, s2 = 0;
      for (double x : *v) m += x / v->size();
      for (double x : *v) s2 += (x - m) * (x - m) / (v->size() - 1);
      EXPECT_LE(std::abs(m), 4.0 * std::sqrt(s2 / v->size())) << to_string(d);
    }
    EXPECT_GT(correlation(g_all, dy_all), 0.3) << to_string(d);
  }
}

TEST(FirstStageProperty, FittedGammaApproachesOracle) {
  // Held-out MSE between gamma_hat and the oracle as N doubles.
  const auto test = simulate(oracle_cfg(2000, 99));
  const auto truth = oracle_gamma(oracle_cfg(2000, 99));
  std::vector<double> row(18);
  std::vector<double> mse;
  for (int n = 250; n <= 8000; n *= 2) {
    const auto sim = simulate(oracle_cfg(n, 7));
    RegressorSpec spec;
    spec.seed = 3;
    const auto g = fit_gamma(sim.data, spec, {});
    double s = 0.0;
    for (int i = 0; i < 2000; ++i) {
      stack_row(test.data, i, {0, 1}, row);
      for (int j = 0; j < 3; ++j) {
        const double e = g.predict(j, {0, 1}, row) - truth(j, {0, 1}, row);
        s += e * e / 6000.0;
      }
    }
    mse.push_back(s);
  }
  int decreases = 0;
  for (std::size_t k = 1; k < mse.size(); ++k) decreases += mse[k] < mse[k - 1];
  EXPECT_GE(decreases, 4) << "mse at 250: " << mse.front() << ", at 8000: " << mse.back();
}

TEST(Ols, RecoversExactLinearOutcome) {
  Rng rng(6);
  const int N = 50, J = 2, T = 3, D = 3;
  const std::vector<double> b = {0.04, -0.02, 0.03};
  std::vector<double> x(N * J * T * D), y(N * J * T);
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < J; ++j) {
        double idx = 0.0;
        for (int d = 0; d < D; ++d) {
          const double v = uniform(rng, -1.0, 1.0);
          x[((i * T + t) * J + j) * D + d] = v;
          idx += v * b[d];
        }
        y[(i * T + t) * J + j] = 0.3 + idx;
      }
  const PanelDataset data(N, J, T, D, x, y, OutcomeKind::shares, true);
  const auto fit = ols_baseline(data, false);
  const auto unit = normalized(b);
  for (int d = 0; d < D; ++d) {
    EXPECT_NEAR(fit.coefficients[d], b[d], 1e-12);
    EXPECT_NEAR(fit.direction[d], unit[d], 1e-10);
  }
  EXPECT_LT(fit.residual_ss, 1e-20);
}

TEST(Ols, FixedEffectsRemoveCellEffects) {
  Rng rng(7);
  const int N = 60, J = 2, T = 4, D = 3;
  const std::vector<double> b = {0.03, 0.02, -0.04};
  std::vector<double> effect(N * J), x(N * J * T * D), y(N * J * T);
  for (double& e : effect) e = uniform(rng, 0.0, 0.2);
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < J; ++j) {
        double idx = 0.0;
        for (int d = 0; d < D; ++d) {
          // Covariates correlated with the cell effect bias plain OLS.
          const double v = uniform(rng, -1.0, 1.0) + (d == 0 ? 5.0 * effect[i * J + j] : 0.0);
          x[((i * T + t) * J + j) * D + d] = v;
          idx += v * b[d];
        }
        y[(i * T + t) * J + j] = 0.2 + effect[i * J + j] + idx;
      }
  const PanelDataset data(N, J, T, D, x, y, OutcomeKind::shares, true);
  const auto fe = ols_baseline(data, true);
  const auto unit = normalized(b);
  for (int d = 0; d < D; ++d) EXPECT_NEAR(fe.direction[d], unit[d], 1e-8);
  const auto plain = ols_baseline(data, false);
  EXPECT_GT(std::abs(plain.direction[0] - unit[0]), 1e-3);
}

TEST(Ols, RankDeficiencyNamesColumn) {
  Rng rng(8);
  const int N = 20, J = 2, T = 3, D = 3;
  std::vector<double> x(N * J * T * D), y(N * J * T, 0.25);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < J; ++j) {
      const double fixed = uniform(rng, -1.0, 1.0);
      for (int t = 0; t < T; ++t) {
        double* v = &x[((i * T + t) * J + j) * D];
        v[0] = uniform(rng, -1.0, 1.0);
        v[1] = fixed;  // constant within the (i, j) cell
        v[2] = uniform(rng, -1.0, 1.0);
      }
    }
  const PanelDataset data(N, J, T, D, x, y, OutcomeKind::shares, true);
  EXPECT_NO_THROW(ols_baseline(data, false));
  try {
    ols_baseline(data, true);
    FAIL() << "expected a rank error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("x2"), std::string::npos) << e.what();
  }
}

TEST(MonteCarlo, ReproducibleAndIndependentOfJobs) {
  McSettings s;
  s.dgp = oracle_cfg(3000, 1);
  s.oracle = true;
  s.replications = 3;
  s.seed = 42;
  s.compare_ols = true;
  const auto a = run_mc(s);
  s.jobs = 2;
  const auto b = run_mc(s);
  ASSERT_EQ(a.records.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    ASSERT_TRUE(a.records[r].ok) << a.records[r].error;
    EXPECT_EQ(a.records[r].seed, b.records[r].seed);
    EXPECT_EQ(a.records[r].sets[0].beta_mid, b.records[r].sets[0].beta_mid);
    EXPECT_EQ(a.records[r].ols, b.records[r].ols);
  }
  EXPECT_EQ(a.estimator[0].rmse_mid, b.estimator[0].rmse_mid);
  EXPECT_EQ(a.estimator[0].bias_mid, b.estimator[0].bias_mid);
  EXPECT_EQ(a.ols->rmse_mid, b.ols->rmse_mid);
}

TEST(MonteCarlo, OracleRunCoversTruth) {
  McSettings s;
  s.dgp = oracle_cfg(100000, 2);
  s.oracle = true;
  s.replications = 1;
  const auto run = run_mc(s);
  ASSERT_TRUE(run.records[0].ok) << run.records[0].error;
  EXPECT_EQ(run.estimator[0].coverage_rate, 1.0);
  EXPECT_EQ(run.records[0].sets[0].q_min, 0.0);
}

TEST(MonteCarlo, CHatGridSharesFirstStage) {
  McSettings s;
  s.dgp.design = Design::partial_id;
  s.dgp.n = 400;
  s.replications = 1;
  s.estimator.regressor.max_epochs = 200;
  s.c_hat_grid = {0.0, 1.0, 100.0};
  const auto run = run_mc(s);
  ASSERT_TRUE(run.records[0].ok) << run.records[0].error;
  ASSERT_EQ(run.estimator.size(), 3u);
  const auto& sets = run.records[0].sets;
  EXPECT_EQ(sets[0].q_min, sets[1].q_min);
  // Larger thresholds keep supersets of the points: bounds widen weakly.
  for (int d = 0; d < 3; ++d) {
    EXPECT_LE(sets[2].beta_lower[d], sets[0].beta_upper[d]);
    EXPECT_GE(sets[2].beta_upper[d] - sets[2].beta_lower[d], 0.0);
  }
  EXPECT_NEAR(sets[1].c_hat, 1.0 / 400, 1e-15);
}

TEST(MonteCarlo, ValidatesSettings) {
  McSettings s;
  s.oracle = true;  // baseline design has fixed effects
  EXPECT_THROW(run_mc(s), ValidationError);
  s = {};
  s.replications = 0;
  EXPECT_THROW(run_mc(s), ValidationError);
}

TEST(Metrics, AggregateFormulas) {
  const std::vector<double> beta0 = {0.6, 0.8};
  const std::vector<double> a = {0.6, 0.8}, b = {-0.8, -0.6};
  const std::vector<double> lo = {-0.9, -0.7}, hi = {-0.7, -0.5};
  const std::vector<detail::Bounds> runs = {{&a, &a, &a, true, true}, {&lo, &hi, &b, false, false}};
  const auto r = detail::aggregate("x", 3, runs, 1, beta0, 0);
  EXPECT_EQ(r.completed, 2);
  EXPECT_EQ(r.failed, 1);
  // Second run is aligned to -beta0 = (-0.6, -0.8): error (-0.2, 0.2).
  EXPECT_NEAR(r.bias_mid[0], -0.1, 1e-15);
  EXPECT_NEAR(r.bias_mid[1], 0.1, 1e-15);
  EXPECT_NEAR(r.rmse_mid, std::sqrt(0.08 / 2), 1e-15);
  EXPECT_NEAR(r.mnd_mid, std::sqrt(0.08) / 2, 1e-15);
  EXPECT_NEAR(r.mad, 0.2, 1e-15);
  EXPECT_NEAR(r.mean_width[0], 0.1, 1e-15);
  EXPECT_EQ(r.sign_rate, 0.5);
  EXPECT_EQ(r.coverage_rate, 0.5);
}

TEST(Config, ParsesDgpSettings) {
  std::istringstream in(
      "# design\n"
      "dgp.design = multiplicative-fe\n"
      "dgp.n = 205   # agents\n"
      "dgp.j = 4\n"
      "dgp.t = 12\n"
      "dgp.beta = -4, 2, 2\n"
      "dgp.alpha = 0.15\n"
      "dgp.outcome = binary\n"
      "dgp.seed = 9\n");
  const auto cfg = dgp_from_settings(parse_settings(in));
  EXPECT_EQ(cfg.design, Design::multiplicative_fe);
  EXPECT_EQ(cfg.n, 205);
  EXPECT_EQ(cfg.j, 4);
  EXPECT_EQ(cfg.t, 12);
  EXPECT_EQ(cfg.beta_true, (std::vector<double>{-4, 2, 2}));
  EXPECT_EQ(cfg.alpha_mix, 0.15);
  EXPECT_EQ(cfg.resolved_outcome(), OutcomeKind::binary);
  EXPECT_EQ(cfg.seed, 9u);
}

TEST(Config, ErrorsNameTheField) {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      dgp_from_settings(parse_settings(in));
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("dgp.beta = 1, x, 2\n").find("dgp.beta[1]"), std::string::npos);
  EXPECT_NE(message("dgp.n = ten\n").find("dgp.n"), std::string::npos);
  EXPECT_NE(message("dgp.colour = red\n").find("dgp.colour"), std::string::npos);
  EXPECT_NE(message("dgp.n = 5\ndgp.n = 6\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("dgp.t\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("dgp.t = 1\n").find("t must be at least 2"), std::string::npos);
}
