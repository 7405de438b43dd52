#include <gtest/gtest.h>

#include <cmath>

#include "credtext/error.hpp"
#include "credtext/eval.hpp"
#include "support.hpp"

using namespace credtext;

namespace {

ScoredSet to_set(const oracle::Scored& s) { return ScoredSet::from(s.scores, s.labels); }

const ScoredSet kFour = ScoredSet::from({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});

}  // namespace

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(auc(ScoredSet::from({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(auc(ScoredSet::from({0.5, 0.5, 0.5}, {0, 1, 1})), 0.5);
  EXPECT_DOUBLE_EQ(auc(kFour), 0.75);
  try {
    auc(ScoredSet::from({0.1, 0.2}, {1, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingleClass);
  }
}

TEST(Ks, Examples) {
  EXPECT_DOUBLE_EQ(ks(ScoredSet::from({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(ks(ScoredSet::from({0.5, 0.5, 0.5}, {0, 1, 1})), 0.0);
  EXPECT_DOUBLE_EQ(ks(kFour), 0.5);
}

TEST(HMeasure, Examples) {
  EXPECT_NEAR(h_measure(ScoredSet::from({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1})), 1.0, 1e-12);
  EXPECT_NEAR(h_measure(ScoredSet::from({0.5, 0.5, 0.5, 0.5}, {0, 1, 1, 0})), 0.0, 1e-12);
  const auto [a, b] = h_measure_beta(kFour);
  EXPECT_DOUBLE_EQ(a, 1.5);
  EXPECT_DOUBLE_EQ(b, 1.5);
  const oracle::Scored four{{0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}};
  EXPECT_NEAR(h_measure(kFour), oracle::h_measure(four, 1.5, 1.5), 1e-6);
}

TEST(HMeasure, SeverityRatioAndBeta22) {
  const oracle::Scored s{{0.1, 0.4, 0.35, 0.8, 0.2, 0.3}, {0, 0, 1, 1, 0, 0}};
  const auto set = to_set(s);
  const auto [a, b] = h_measure_beta(set);
  EXPECT_NEAR(a, 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(b, 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(h_measure(set), oracle::h_measure(s, 4.0 / 3.0, 5.0 / 3.0), 1e-6);
  HMeasureOptions o;
  o.beta22 = true;
  EXPECT_NEAR(h_measure(set, o), oracle::h_measure(s, 2.0, 2.0), 1e-6);
}

TEST(PrAuc, Examples) {
  EXPECT_DOUBLE_EQ(pr_auc(ScoredSet::from({0.3, 0.9, 0.1}, {1, 1, 1})), 1.0);
  EXPECT_NEAR(pr_auc(ScoredSet::from({0.9, 0.8, 0.7}, {1, 0, 1})), 0.5 + 0.5 * 2.0 / 3.0, 1e-12);
  oracle::Scored last;
  for (int i = 0; i < 10; ++i) {
    last.scores.push_back(1.0 - 0.1 * i);
    last.labels.push_back(i >= 7 ? 1 : 0);
  }
  EXPECT_DOUBLE_EQ(pr_auc(to_set(last)), oracle::average_precision(last));
}

TEST(TopK, Examples) {
  const auto s = ScoredSet::from({0.9, 0.8, 0.2, 0.1}, {1, 0, 1, 0}, {"a", "b", "c", "d"});
  auto m = topk_metrics(s, 2);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
  m = topk_metrics(s, 4);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  const auto none = ScoredSet::from({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}, {"a", "b", "c", "d"});
  m = topk_metrics(none, 2);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_THROW(topk_metrics(s, 0), Error);
  EXPECT_THROW(topk_metrics(s, 5), Error);
}

TEST(TopK, TiesBreakById) {
  const auto s = ScoredSet::from({0.5, 0.5}, {0, 1}, {"b", "a"});
  EXPECT_DOUBLE_EQ(topk_metrics(s, 1).recall, 1.0);
}

TEST(TopK, Scaling) {
  const std::vector<int> ref = {70, 100, 120, 150, 165};
  EXPECT_EQ(scale_topk(ref, 738, 738), (std::vector<Eigen::Index>{70, 100, 120, 150, 165}));
  EXPECT_EQ(scale_topk(ref, 738, 600), (std::vector<Eigen::Index>{57, 81, 98, 122, 134}));
  EXPECT_EQ(scale_topk(ref, 738, 3), (std::vector<Eigen::Index>{1, 1, 1, 1, 1}));
}

TEST(Curves, RocPoints) {
  using P = std::vector<std::pair<double, double>>;
  EXPECT_EQ(roc_points(ScoredSet::from({0.1, 0.9}, {0, 1})), (P{{0, 0}, {0, 1}, {1, 1}}));
  EXPECT_EQ(roc_points(ScoredSet::from({0.3, 0.3, 0.3}, {0, 1, 0})), (P{{0, 0}, {1, 1}}));
  const auto pts = roc_points(kFour);
  const auto want = oracle::rates({{0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}});
  // the oracle sweeps thresholds upward
  ASSERT_EQ(pts.size(), want.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_DOUBLE_EQ(pts[i].first, want[want.size() - 1 - i].first);
    EXPECT_DOUBLE_EQ(pts[i].second, want[want.size() - 1 - i].second);
  }
}

TEST(MetricOracle, RandomScoredSets) {
  std::mt19937_64 rng(31337);
  for (int draw = 0; draw < 200; ++draw) {
    const auto s = gen::scored_set(rng);
    const auto set = to_set(s);
    ASSERT_NEAR(auc(set), oracle::auc(s), 1e-9) << draw;
    ASSERT_NEAR(ks(set), oracle::ks(s), 1e-9) << draw;
    ASSERT_NEAR(pr_auc(set), oracle::average_precision(s), 1e-9) << draw;
    const auto [a, b] = h_measure_beta(set);
    ASSERT_NEAR(h_measure(set), oracle::h_measure(s, a, b), 1e-6) << draw;
  }
}

// Metrics see only the ranking: a strictly increasing transform of the
// scores changes nothing.
TEST(MetricProperty, RankInvariance) {
  std::mt19937_64 rng(4);
  for (int draw = 0; draw < 100; ++draw) {
    auto s = gen::scored_set(rng);
    const auto set = to_set(s);
    for (auto& v : s.scores) v = std::exp(3.0 * v) - 7.0;
    const auto moved = to_set(s);
    EXPECT_DOUBLE_EQ(auc(set), auc(moved));
    EXPECT_DOUBLE_EQ(ks(set), ks(moved));
    EXPECT_DOUBLE_EQ(pr_auc(set), pr_auc(moved));
    EXPECT_NEAR(h_measure(set), h_measure(moved), 1e-12);
    const double h = h_measure(set);
    EXPECT_LE(h, 1.0 + 1e-12);
  }
}

TEST(Bootstrap, ConstantMetric) {
  const Metric constant{"c", [](const ScoredSet&) { return 0.42; }};
  const std::vector<ScoredSet> runs = {kFour};
  const auto e = bootstrap(constant, runs, {50, 3, 1, 100});
  EXPECT_DOUBLE_EQ(e.mean, 0.42);
  EXPECT_DOUBLE_EQ(e.ci_low, 0.42);
  EXPECT_DOUBLE_EQ(e.ci_high, 0.42);
  EXPECT_EQ(e.n_estimates, 50u);
}

TEST(Bootstrap, CountsAndWorkerIndependence) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise;
  std::vector<int> labels(60);
  std::vector<std::string> ids(60);
  for (int i = 0; i < 60; ++i) {
    labels[i] = i % 4 == 0;
    ids[i] = "L" + std::to_string(i);
  }
  std::vector<ScoredSet> runs;
  for (int r = 0; r < 5; ++r) {
    std::vector<double> scores(60);
    for (int i = 0; i < 60; ++i) scores[i] = labels[i] + noise(rng);
    runs.push_back(ScoredSet::from(scores, labels, ids));
  }
  const auto metric = metric_by_name("auc");
  std::string first;
  for (int w : {1, 4, 8}) {
    const auto e = bootstrap(metric, runs, {1000, 99, w, 100});
    EXPECT_EQ(e.n_estimates + e.skipped_resamples, 5000u);
    EXPECT_LE(e.ci_low, e.mean);
    EXPECT_LE(e.mean, e.ci_high);
    const auto json = metric_estimate_json(e);
    if (first.empty())
      first = json;
    else
      EXPECT_EQ(json, first) << "workers " << w;
  }
}

TEST(Bootstrap, Percentile) {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(percentile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile(v, 0.125), 1.5);
  EXPECT_DOUBLE_EQ(percentile(v, 1.0), 5.0);
}
