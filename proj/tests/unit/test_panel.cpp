#include <gtest/gtest.h>

#include <sstream>

#include "pmc/panel.hpp"
#include "pmc/panel_csv.hpp"
#include "pmc/rng.hpp"

using namespace pmc;

namespace {

const char* kTinyCsv =
    "agent,product,period,outcome,x1\n"
    "1,1,1,1,0.5\n"
    "1,2,1,0,-1\n"
    "1,1,2,0,2\n"
    "1,2,2,1,3\n"
    "2,1,1,0,1.25\n"
    "2,2,1,1,0\n"
    "2,1,2,1,-0.75\n"
    "2,2,2,0,4\n";

PanelDataset random_panel(int n, int j, int t, int d, std::uint64_t seed, OutcomeKind kind = OutcomeKind::binary) {
  Rng rng(seed);
  std::vector<double> x(std::size_t(n) * j * t * d), y(std::size_t(n) * j * t, 0.0);
  for (double& v : x) v = standard_normal(rng) * 3.0;
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < t; ++p) {
      if (kind == OutcomeKind::binary) {
        const int pick = static_cast<int>(uniform_open(rng) * j);
        y[(std::size_t(i) * t + p) * j + pick] = 1.0;
      } else {
        double total = 0.0;
        std::vector<double> w(j);
        for (double& v : w) total += v = uniform_open(rng);
        for (int q = 0; q < j; ++q) y[(std::size_t(i) * t + p) * j + q] = w[q] / (total + 1.0);
      }
    }
  return PanelDataset(n, j, t, d, std::move(x), std::move(y), kind, kind == OutcomeKind::shares);
}

}  // namespace

TEST(PanelCsv, MinimalBinaryFile) {
  std::istringstream in(kTinyCsv);
  const auto data = read_csv(in);
  EXPECT_EQ(data.n_agents(), 2);
  EXPECT_EQ(data.n_products(), 2);
  EXPECT_EQ(data.n_periods(), 2);
  EXPECT_EQ(data.n_covariates(), 1);
  EXPECT_DOUBLE_EQ(data.x(1, 0, 1, 0), -0.75);
  EXPECT_EQ(data.outcome(0, 1, 1), 1.0);
}

TEST(PanelCsv, RejectsDoubleChoice) {
  std::string text = kTinyCsv;
  text.replace(text.find("1,2,1,0,-1"), 10, "1,2,1,1,-1");
  std::istringstream in(text);
  EXPECT_THROW(read_csv(in), ValidationError);
}

TEST(PanelCsv, AcceptsEqualShares) {
  std::ostringstream text;
  text << "agent,product,period,outcome,x1\n";
  for (int t = 1; t <= 2; ++t)
    for (int j = 1; j <= 4; ++j) text << "1," << j << ',' << t << ",0.25," << j * t << '\n';
  std::istringstream in(text.str());
  CsvSchema schema;
  schema.kind = OutcomeKind::shares;
  const auto data = read_csv(in, schema);
  EXPECT_EQ(data.n_products(), 4);
  EXPECT_EQ(data.outcome_kind(), OutcomeKind::shares);
}

TEST(PanelCsv, MissingCellNamesLine) {
  std::string text = kTinyCsv;
  text.replace(text.find("2,1,2,1,-0.75"), 13, "2,1,2,1,");
  std::istringstream in(text);
  try {
    read_csv(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 8u);
  }
}

TEST(PanelCsv, MissingColumnIsNamed) {
  std::istringstream in("agent,product,period,x1\n1,1,1,0\n");
  try {
    read_csv(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("outcome"), std::string::npos);
  }
}

TEST(PanelCsv, RoundTripIsBitExact) {
  for (auto kind : {OutcomeKind::binary, OutcomeKind::shares}) {
    const auto data = random_panel(17, 3, 4, 3, 99, kind);
    std::stringstream buf;
    write_csv(buf, data);
    CsvSchema schema;
    schema.kind = kind;
    schema.outside_option = data.outside_option();
    const auto back = read_csv(buf, schema);
    EXPECT_EQ(back.covariates(), data.covariates());
    EXPECT_EQ(back.outcomes(), data.outcomes());
  }
}

TEST(Panel, InvalidDimensions) {
  EXPECT_THROW(PanelDataset(1, 1, 1, 1, {0.0}, {1.0}, OutcomeKind::binary, false), ValidationError);
  EXPECT_THROW(PanelDataset(1, 1, 2, 1, {0.0}, {1.0, 1.0}, OutcomeKind::binary, false), ValidationError);
  EXPECT_THROW(PanelDataset(1, 1, 2, 1, {0.0, NAN}, {1.0, 1.0}, OutcomeKind::binary, false), ValidationError);
}

TEST(Panel, StackPairLayout) {
  // J=1, D=1: X_11 = 3, X_12 = 5.
  PanelDataset one(1, 1, 2, 1, {3.0, 5.0}, {1.0, 1.0}, OutcomeKind::binary, false);
  EXPECT_EQ(stack_pair(one, {0, 1}), (std::vector<double>{3.0, 5.0}));

  // J=2, D=1, layout (i, t, j): X_11=1, X_21=2, X_12=3, X_22=4.
  PanelDataset two(1, 2, 2, 1, {1.0, 2.0, 3.0, 4.0}, {1.0, 0.0, 0.0, 1.0}, OutcomeKind::binary, false);
  EXPECT_EQ(stack_pair(two, {0, 1}), (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
  EXPECT_EQ(stack_pair(two, {1, 0}), (std::vector<double>{3.0, 4.0, 1.0, 2.0}));
  EXPECT_THROW(stack_pair(two, {0, 2}), ValidationError);
  EXPECT_THROW(stack_pair(two, {1, 1}), ValidationError);
}

TEST(Panel, OutcomeDiffExamples) {
  PanelDataset b(1, 2, 2, 1, {0, 0, 0, 0}, {1.0, 0.0, 0.0, 1.0}, OutcomeKind::binary, false);
  EXPECT_EQ(outcome_diff(b, 0, {0, 1})[0], 1.0);
  PanelDataset same(1, 2, 2, 1, {0, 0, 0, 0}, {1.0, 0.0, 1.0, 0.0}, OutcomeKind::binary, false);
  EXPECT_EQ(outcome_diff(same, 0, {0, 1})[0], 0.0);
  PanelDataset s(1, 2, 2, 1, {0, 0, 0, 0}, {0.4, 0.1, 0.25, 0.5}, OutcomeKind::shares, true);
  EXPECT_NEAR(outcome_diff(s, 0, {0, 1})[0], 0.15, 1e-15);
  EXPECT_THROW(outcome_diff(s, 2, {0, 1}), ValidationError);
}

TEST(PanelProperty, OutcomeDiffAntisymmetricAndSumsToZero) {
  const auto data = random_panel(50, 4, 3, 2, 7);
  for (int t = 0; t < 3; ++t)
    for (int s = 0; s < 3; ++s) {
      if (t == s) continue;
      std::vector<double> sum(50, 0.0);
      for (int j = 0; j < 4; ++j) {
        const auto a = outcome_diff(data, j, {t, s});
        const auto b = outcome_diff(data, j, {s, t});
        for (int i = 0; i < 50; ++i) {
          EXPECT_EQ(a[i], -b[i]);
          sum[i] += a[i];
        }
      }
      for (double v : sum) EXPECT_EQ(v, 0.0);
    }
}

TEST(Panel, PairPolicies) {
  EXPECT_EQ(select_pairs(3, {}).size(), 3u);
  EXPECT_EQ(select_pairs(12, {}).size(), 11u);
  PairPolicy all{PairPolicy::Kind::all};
  EXPECT_EQ(select_pairs(12, all).size(), 66u);
  PairPolicy rnd{PairPolicy::Kind::random, 10, 5};
  const auto a = select_pairs(12, rnd), b = select_pairs(12, rnd);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t k = 1; k < a.size(); ++k) EXPECT_LT(a[k - 1], a[k]);
  EXPECT_THROW(parse_pair_policy("some"), ValidationError);
}
