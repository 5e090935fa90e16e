#include <gtest/gtest.h>

#include <cmath>

#include "pmc/criterion.hpp"
#include "pmc/optimizer.hpp"
#include "pmc/rng.hpp"

using namespace pmc;

namespace {

double first_angle(std::span<const double> b) { return std::atan2(b[1], b[0]); }

// Circular distance between two first-coordinate angles.
double arc(double a, double b) {
  const double d = std::abs(wrap_angle(a - b));
  return std::min(d, two_pi - d);
}

// Largest grid spacing of the final round over all angle coordinates.
double final_spacing(const EstimationResult& r) {
  const auto& last = r.trace.back();
  double h = 0.0;
  for (std::size_t k = 0; k < last.box.size(); ++k) h = std::max(h, last.box.width(k) / (last.grid - 1));
  return h;
}

void expect_contains_retained(const EstimationResult& r) {
  for (std::size_t k = 0; k < r.retained.size(); ++k) {
    EXPECT_TRUE(r.set_enclosure.contains(r.retained[k]));
    if (r.retained_values[k] == r.q_min) {
      EXPECT_TRUE(r.argmin_enclosure.contains(r.retained[k]));
    }
  }
  EXPECT_TRUE(r.set_enclosure.contains(r.argmin_enclosure));
}

}  // namespace

TEST(Optimizer, StepCriterionInterval) {
  const auto q = [](std::span<const double> b) {
    const double t = first_angle(b);
    return (t >= 0.3 && t <= 0.4) ? 0.0 : 1.0;
  };
  const auto r = minimize(q, GridConfig{}, 2);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.q_min, 0.0);
  expect_contains_retained(r);
  const double h = final_spacing(r);
  const auto& box = r.argmin_enclosure;
  EXPECT_LE(box.lower()[0], 0.3);
  EXPECT_GE(box.upper()[0], 0.4);
  EXPECT_LE(box.diameter_bound(), 0.1 + GridConfig{}.precision);
  EXPECT_LE(h, GridConfig{}.precision);
}

TEST(Optimizer, SeamStraddlingZeroSet) {
  const auto q = [](std::span<const double> b) { return std::abs(first_angle(b)) >= pi - 0.05 ? 0.0 : 1.0; };
  const auto r = minimize(q, GridConfig{}, 2);
  EXPECT_TRUE(r.converged);
  const auto& box = r.argmin_enclosure;
  EXPECT_TRUE(box.wrapped());
  EXPECT_GE(box.width(0), 0.1);
  EXPECT_LE(box.width(0), 0.1 + 1e-3);
  EXPECT_TRUE(box.contains(AngleVector({-pi})));
  EXPECT_TRUE(box.contains(AngleVector({pi - 0.04})));
}

TEST(OptimizerProperty, RotationAboutFirstCoordinate) {
  // Zero set: a small cap around direction (c, 0.2) in D=3, criterion growing with
  // distance outside it; rotating c moves the cap across the seam for some offsets.
  const double base = 2.9;
  auto run = [](double c) {
    const UnitVector centre = to_unit(AngleVector({c, 0.2}));
    const auto q = [centre](std::span<const double> b) {
      return std::max(0.0, geodesic(UnitVector(std::vector<double>(b.begin(), b.end())), centre) - 0.03);
    };
    GridConfig cfg;
    cfg.precision = 1e-2;
    return minimize(q, cfg, 3);
  };
  const auto ref = run(base);
  for (double shift : {0.5, 0.3, -1.0, 2.0}) {
    const auto rot = run(base + shift);
    const double cell = std::max(final_spacing(ref), final_spacing(rot)) + 1e-12;
    EXPECT_LE(arc(rot.argmin_enclosure.lower()[0], wrap_angle(ref.argmin_enclosure.lower()[0] + shift)), cell);
    EXPECT_NEAR(rot.argmin_enclosure.width(0), ref.argmin_enclosure.width(0), cell);
    EXPECT_NEAR(rot.argmin_enclosure.lower()[1], ref.argmin_enclosure.lower()[1], cell);
    EXPECT_NEAR(rot.argmin_enclosure.upper()[1], ref.argmin_enclosure.upper()[1], cell);
  }
}

TEST(OptimizerProperty, MonotoneRefinementAndConservativeness) {
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const int dim = 2 + rep % 3;
    std::vector<double> v(dim);
    for (double& x : v) x = standard_normal(rng);
    const UnitVector target = UnitVector::normalized(v);
    // Piecewise constant: distance to target, floored to a 0.05 ladder.
    const auto q = [target](std::span<const double> b) {
      return std::floor(geodesic(UnitVector(std::vector<double>(b.begin(), b.end())), target) / 0.05);
    };
    GridConfig cfg;
    cfg.c_hat = rep % 2 ? 1.0 : 0.0;
    cfg.precision = 1e-2;
    const auto r = set_estimate(q, cfg, dim);
    for (std::size_t k = 1; k < r.trace.size(); ++k) {
      EXPECT_LE(r.trace[k].diameter, r.trace[k - 1].diameter + 1e-15);
      EXPECT_TRUE(r.trace[k - 1].box.contains(r.trace[k].box));
    }
    expect_contains_retained(r);
    EXPECT_TRUE(r.set_enclosure.contains(from_unit(target), 0.05 + 1e-9) || r.q_min > 0.0);
    for (int d = 0; d < dim; ++d) {
      EXPECT_LE(r.beta_lower[d], r.beta_mid[d]);
      EXPECT_LE(r.beta_mid[d], r.beta_upper[d]);
    }
  }
}

TEST(Optimizer, ZeroCHatMatchesMinimize) {
  const auto q = [](std::span<const double> b) { return std::floor(4.0 * (1.0 - b[0])); };
  GridConfig cfg;
  const auto a = minimize(q, cfg, 3);
  cfg.c_hat = 0.0;
  const auto b = set_estimate(q, cfg, 3);
  EXPECT_EQ(a.argmin_enclosure, b.set_enclosure);
  EXPECT_EQ(b.argmin_enclosure, b.set_enclosure);
}

TEST(Optimizer, HugeCHatCoversTheta) {
  const auto q = [](std::span<const double> b) { return 1.0 - b[0]; };
  GridConfig cfg;
  cfg.c_hat = 10.0;
  const auto r = set_estimate(q, cfg, 3);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.set_enclosure.full_circle());
  EXPECT_EQ(r.set_enclosure, AngleRectangle::full(3));
  EXPECT_TRUE(r.set_enclosure.contains(r.argmin_enclosure));
}

TEST(Optimizer, PointTargetReachesPrecision) {
  const UnitVector target = UnitVector::normalized({2.0, 1.0, 1.0});
  const auto q = [target](std::span<const double> b) {
    return geodesic(UnitVector(std::vector<double>(b.begin(), b.end())), target);
  };
  const auto r = minimize(q, GridConfig{}, 3);
  EXPECT_EQ(r.stop, StopReason::precision);
  EXPECT_LE(r.argmin_enclosure.diameter_bound(), 1e-3);
  EXPECT_TRUE(r.argmin_enclosure.contains(from_unit(target), 1e-3));
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(r.beta_mid[d], target[d], 1e-3);
}

TEST(Optimizer, MaxRoundsFlagsUnconverged) {
  const auto q = [](std::span<const double> b) { return 1.0 - b[0]; };
  GridConfig cfg;
  cfg.max_rounds = 2;
  const auto r = minimize(q, cfg, 3);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.stop, StopReason::max_rounds);
  EXPECT_EQ(r.rounds, 2);
}

TEST(Optimizer, ConfigValidation) {
  const auto q = [](std::span<const double>) { return 0.0; };
  GridConfig cfg;
  cfg.quantile_alpha = 1.0;
  EXPECT_THROW(minimize(q, cfg, 3), ValidationError);
  cfg = {};
  cfg.precision = 0.0;
  EXPECT_THROW(minimize(q, cfg, 3), ValidationError);
  EXPECT_THROW(minimize(q, GridConfig{}, 1), ValidationError);
  cfg = {};
  cfg.c_hat = -1.0;
  EXPECT_THROW(set_estimate(q, cfg, 3), ValidationError);
}

TEST(Optimizer, CHatRule) {
  EXPECT_NEAR(resolve_c_hat(CHatRule{}, 205), 0.014, 5e-4);
  const double n = 10000.0;
  EXPECT_DOUBLE_EQ(resolve_c_hat(CHatRule{0.02}, 10000), 0.02 * std::pow(n, -0.25) * std::log(n));
  EXPECT_EQ(resolve_c_hat(0.5, 10), 0.5);
}

TEST(OptimizerProperty, DeterministicAndFocusExact) {
  Rng rng(22);
  const int n = 400, J = 3, T = 2, D = 3;
  std::vector<double> x(std::size_t(n) * J * T * D), y(std::size_t(n) * J * T, 0.0);
  for (double& v : x) v = standard_normal(rng);
  for (int i = 0; i < n * T; ++i) y[std::size_t(i) * J + static_cast<int>(uniform_open(rng) * J)] = 1.0;
  const PanelDataset data(n, J, T, D, x, y, OutcomeKind::binary, false);
  const std::vector<double> b0{0.8, 0.4, 0.2};
  const GammaFunction gamma = [&](int j, PeriodPair, std::span<const double> row) {
    return 0.5 * std::tanh(product_index(row.subspan(0, J * D), j, b0) - product_index(row.subspan(J * D), j, b0));
  };
  CriterionOptions opt;
  const CriterionEvaluator ev(data, gamma, opt);
  const auto plain = [&ev](std::span<const double> b) { return ev(b); };
  GridConfig cfg;
  cfg.c_hat = 0.01;
  const auto a = set_estimate(ev, cfg, D), b = set_estimate(ev, cfg, D), c = set_estimate(plain, cfg, D);
  cfg.jobs = 3;
  const auto d = set_estimate(ev, cfg, D);
  for (const auto* other : {&b, &c, &d}) {
    ASSERT_EQ(a.trace.size(), other->trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
      EXPECT_EQ(a.trace[k].box, other->trace[k].box);
      EXPECT_EQ(a.trace[k].q_min, other->trace[k].q_min);
      EXPECT_EQ(a.trace[k].selected, other->trace[k].selected);
    }
    EXPECT_EQ(a.set_enclosure, other->set_enclosure);
    EXPECT_EQ(a.beta_mid, other->beta_mid);
  }
}
