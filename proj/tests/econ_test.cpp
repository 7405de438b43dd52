#include <gtest/gtest.h>

#include <cmath>

#include "credtext/econ.hpp"
#include "credtext/rng.hpp"

using namespace credtext;

namespace {

std::map<std::string, LoanEconomics> two_loans() {
  return {{"good", {100.0, 0.10, 0}}, {"bad", {100.0, 0.10, 1}}};
}

}  // namespace

TEST(LoanProfit, Examples) {
  EXPECT_NEAR(loan_profit(0, 100, 0.10), 10.0, 1e-12);
  EXPECT_NEAR(loan_profit(1, 100, 0.10), -89.0, 1e-12);
  EXPECT_DOUBLE_EQ(loan_profit(1, 100, 0.10, {0.0}), loan_profit(0, 100, 0.10, {0.0}));
}

TEST(ProfitCurve, TwoLoans) {
  const auto s = ScoredSet::from({0.2, 0.9}, {0, 1}, {"good", "bad"});
  const auto c = profit_curve(s, two_loans());
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(c.points[0].profit, -79.0, 1e-12);
  EXPECT_NEAR(c.points[1].profit, 10.0, 1e-12);
  EXPECT_EQ(c.points[2].profit, 0.0);
  EXPECT_TRUE(std::isinf(c.points[0].threshold));
  EXPECT_EQ(c.points[1].rejected_id, "bad");

  const auto best = profit_max_threshold(c);
  EXPECT_EQ(best.rejected, 1u);
  EXPECT_NEAR(best.profit, 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(best.threshold, 0.9);

  const auto reversed = profit_curve(ScoredSet::from({0.9, 0.2}, {0, 1}, {"good", "bad"}), two_loans());
  const auto diff = profit_difference(c, reversed);
  EXPECT_NEAR(diff[1], 99.0, 1e-12);
  for (double d : profit_difference(c, c)) EXPECT_EQ(d, 0.0);
}

TEST(ProfitCurve, OracleOrderingMaximalAtBads) {
  std::map<std::string, LoanEconomics> econ;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> ids;
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    const int bad = i < 6;
    ids.push_back("L" + std::to_string(i));
    econ[ids.back()] = {rng.uniform(50, 500), rng.uniform(0.05, 0.2), bad};
    scores.push_back(bad ? 0.9 + 0.01 * i : 0.1 + 0.01 * i);
    labels.push_back(bad);
  }
  const auto c = profit_curve(ScoredSet::from(scores, labels, ids), econ);
  EXPECT_EQ(profit_max_threshold(c).rejected, 6u);
}

TEST(ProfitMax, MonotoneAndPlateau) {
  ProfitCurve dec;
  for (int k = 0; k <= 3; ++k) dec.points.push_back({static_cast<std::size_t>(k), 0.0, 3.0 - k, ""});
  EXPECT_EQ(profit_max_threshold(dec).rejected, 0u);
  ProfitCurve plateau;
  const double v[] = {1, 5, 5, 0};
  for (int k = 0; k <= 3; ++k) plateau.points.push_back({static_cast<std::size_t>(k), 0.0, v[k], ""});
  EXPECT_EQ(profit_max_threshold(plateau).rejected, 1u);
}

// Random portfolios: accept-all equals the summed loan profits, and each
// step removes exactly the rejected loan's profit.
TEST(ProfitProperty, SumAndMarginalIdentity) {
  Rng rng(101);
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t n = 1 + rng.index(40);
    std::map<std::string, LoanEconomics> econ;
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<std::string> ids;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("L" + std::to_string(i));
      const int bad = rng.bernoulli(0.3);
      const LoanEconomics e{rng.uniform(10, 1000), rng.uniform(0.01, 0.3), bad};
      econ[ids.back()] = e;
      total += loan_profit(bad, e.amount, e.rate);
      scores.push_back(static_cast<double>(rng.index(5)));
      labels.push_back(bad);
    }
    const auto c = profit_curve(ScoredSet::from(scores, labels, ids), econ);
    ASSERT_EQ(c.size(), n);
    EXPECT_NEAR(c.points[0].profit, total, 1e-9);
    EXPECT_EQ(c.points[n].profit, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& e = econ.at(c.points[k + 1].rejected_id);
      EXPECT_EQ(c.points[k].profit, c.points[k + 1].profit + loan_profit(e.label, e.amount, e.rate));
    }
  }
}
