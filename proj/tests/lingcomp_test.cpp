#include <gtest/gtest.h>

#include <cmath>

#include "credtext/error.hpp"
#include "credtext/lingcomp.hpp"
#include "credtext/rng.hpp"
#include "support.hpp"

using namespace credtext;

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Eigen::Vector2d(3, 4), Eigen::Vector2d(3, 4)), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)), 0.0);
  EXPECT_NEAR(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)), 1.0 / std::sqrt(2.0), 1e-15);
  try {
    cosine_similarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroVector);
  }
  try {
    cosine_similarity(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimMismatch);
  }
}

TEST(MannWhitney, Examples) {
  const std::vector<double> a = {1, 2}, b = {3, 4};
  const auto r = mann_whitney_u(a, b);
  EXPECT_DOUBLE_EQ(r.u, 0.0);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_two_sided, 1.0 / 3.0, 1e-15);
  const std::vector<double> c = {1, 3}, d = {2, 4};
  EXPECT_DOUBLE_EQ(mann_whitney_u(c, d).u, 1.0);
  EXPECT_DOUBLE_EQ(mann_whitney_u(d, c).u, 3.0);
}

TEST(MannWhitney, ShiftedLargeSamples) {
  Rng rng(5);
  std::vector<double> a(50), b(50);
  for (auto& v : a) v = 3.0 + rng.normal();
  for (auto& v : b) v = rng.normal();
  const auto r = mann_whitney_u(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_LT(r.p_two_sided, 0.01);
}

TEST(MannWhitney, EmptySample) {
  const std::vector<double> a = {1}, none;
  try {
    mann_whitney_u(a, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptySample);
  }
}

TEST(MannWhitneyProperty, ExactMatchesEnumeration) {
  Rng rng(17);
  for (int draw = 0; draw < 100; ++draw) {
    std::vector<double> a(1 + rng.index(5)), b(1 + rng.index(5));
    for (auto& v : a) v = static_cast<double>(rng.index(6));
    for (auto& v : b) v = static_cast<double>(rng.index(6));
    const auto r = mann_whitney_u(a, b);
    ASSERT_TRUE(r.exact);
    EXPECT_NEAR(r.p_two_sided, oracle::mann_whitney_exact_p(a, b), 1e-12) << draw;
  }
}

TEST(MannWhitneyProperty, ComplementarySums) {
  Rng rng(23);
  for (int draw = 0; draw < 1000; ++draw) {
    std::vector<double> a(1 + rng.index(30)), b(1 + rng.index(30));
    for (auto& v : a) v = std::round(rng.normal() * 3.0);
    for (auto& v : b) v = std::round(rng.normal() * 3.0);
    const double ua = mann_whitney_u(a, b).u, ub = mann_whitney_u(b, a).u;
    EXPECT_EQ(ua + ub, static_cast<double>(a.size() * b.size()));
    const double p = mann_whitney_u(a, b).p_two_sided;
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(Welch, Examples) {
  EXPECT_EQ(welch_proportion_t(0.3, 50, 0.3, 80), 0.0);
  EXPECT_EQ(welch_proportion_t(0.1, 100, 0.2, 100), 2.0);
  EXPECT_EQ(welch_proportion_t(0.2, 100, 0.1, 100), -2.0);
  try {
    welch_proportion_t(0.0, 10, 0.0, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroVariance);
  }
}

TEST(Bonferroni, Levels) {
  EXPECT_EQ(bonferroni_level(0.01, 72), 0.01 / 72);
  EXPECT_NEAR(bonferroni_level(0.01, 72), 1.39e-4, 1e-6);
  EXPECT_NEAR(bonferroni_critical(0.05, 1), 1.959963984540054, 1e-12);
}

TEST(Dictionary, ParseAndFrequencies) {
  const auto d = parse_dictionary("# comment\n%category work\nwork*\njob\n%category rest\nsleep\n");
  ASSERT_EQ(d.categories.size(), 2u);
  EXPECT_TRUE(d.matches(0, "working"));
  EXPECT_FALSE(d.matches(0, "jobs"));
  const std::vector<TokenList> docs = {{"working", "rest"}};
  const auto f = category_frequencies(docs, d);
  EXPECT_DOUBLE_EQ(f[0].second, 0.5);
  EXPECT_DOUBLE_EQ(f[1].second, 0.0);
  for (const char* bad : {"orphan\n", "%category x\nwo*rk\n", "%category empty\n%category y\nz\n"}) {
    try {
      parse_dictionary(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedLine);
    }
  }
}

TEST(CompareCorpora, IdenticalAndPlanted) {
  const auto d = parse_dictionary("%category risk\nloss\n%category other\nfine\n");
  std::vector<TokenList> same = {{"loss", "fine", "x", "y"}, {"fine", "z"}};
  for (const auto& row : compare_corpora(same, same, d)) {
    EXPECT_EQ(row.t, 0.0);
    for (bool s : row.significant) EXPECT_FALSE(s);
  }

  // "loss" at 1 % in corpus 1 and 2 % in corpus 2, 10^4 tokens each
  TokenList c1(10000, "x"), c2(10000, "x");
  for (int i = 0; i < 100; ++i) c1[i] = "loss";
  for (int i = 0; i < 200; ++i) c2[i] = "loss";
  for (int i = 300; i < 400; ++i) c1[i] = c2[i] = "fine";
  const std::vector<TokenList> k1 = {c1}, k2 = {c2};
  const auto rows = compare_corpora(k1, k2, d);
  EXPECT_GT(rows[0].t, 0.0);
  EXPECT_TRUE(rows[0].significant[2]);
  EXPECT_FALSE(rows[1].significant[0]);
  const auto csv = comparison_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "category,f_human,f_refined,t,p_0.1,p_0.05,p_0.01");
}
