#include <gtest/gtest.h>

#include <cmath>

#include "credtext/error.hpp"
#include "credtext/eval.hpp"
#include "credtext/refine.hpp"
#include "credtext/synthgen.hpp"
#include "support.hpp"

using namespace credtext;
namespace ts = testing_support;

namespace {

double auc_of(const std::vector<double>& scores, const Dataset& d) {
  std::vector<int> labels;
  for (const auto& r : d.records) labels.push_back(r.label);
  return auc(ScoredSet::from(scores, labels));
}

}  // namespace

TEST(Synth, ByteIdenticalAcrossRuns) {
  auto cfg = synth_preset("balanced");
  cfg.n = 300;
  const auto a = ts::temp_dir("synth-a"), b = ts::temp_dir("synth-b");
  save_synth(a, generate(cfg));
  save_synth(b, generate(cfg));
  for (const char* f : {"dataset.jsonl", "schema.json", "truth.json"}) {
    const auto left = ts::read(a / f);
    EXPECT_FALSE(left.empty()) << f;
    EXPECT_EQ(left, ts::read(b / f)) << f;
  }
  cfg.seed = 2;
  const auto c = ts::temp_dir("synth-c");
  save_synth(c, generate(cfg));
  EXPECT_NE(ts::read(a / "dataset.jsonl"), ts::read(c / "dataset.jsonl"));
}

TEST(Synth, TruthReproducesProbability) {
  const auto out = generate(synth_preset("reference"));
  ASSERT_EQ(out.truth.size(), 2460u);
  EXPECT_EQ(out.dataset.records.front().id, "L0001");
  for (const auto& t : out.truth) {
    const double z = truth_log_odds(out.intercept, t, out.clause_table);
    EXPECT_NEAR(z, t.log_odds, 1e-12);
    EXPECT_NEAR(1.0 / (1.0 + std::exp(-z)), t.probability, 1e-12);
  }
}

TEST(Synth, CalibratedDefaultCount) {
  for (const char* preset : {"reference", "balanced", "acceptance"}) {
    const auto cfg = synth_preset(preset);
    const auto out = generate(cfg);
    double mean_p = 0.0, var = 0.0, defaults = 0.0;
    for (std::size_t i = 0; i < out.truth.size(); ++i) {
      const double p = out.truth[i].probability;
      mean_p += p;
      var += p * (1.0 - p);
      defaults += out.dataset.records[i].label;
    }
    EXPECT_NEAR(mean_p / static_cast<double>(cfg.n), cfg.default_rate, 1e-6) << preset;
    // 99 % normal interval for a sum of independent Bernoulli draws
    EXPECT_LE(std::abs(defaults - mean_p), 2.5758 * std::sqrt(var)) << preset;
  }
}

TEST(Synth, RefinedTextsAlwaysParse) {
  auto cfg = synth_preset("acceptance");
  const auto out = generate(cfg);
  for (const auto& r : out.dataset.records) {
    ASSERT_TRUE(r.refined_texts.contains("full")) << r.id;
    const auto s = parse_sections(r.refined_texts.at("full"));
    EXPECT_EQ(s.positive, r.refined_texts.at("positive"));
    EXPECT_EQ(s.negative, r.refined_texts.at("negative"));
  }
}

TEST(Synth, SignalPlacement) {
  const auto none = generate(synth_preset("no_signal"));
  for (const auto& t : none.truth) EXPECT_DOUBLE_EQ(t.probability, none.truth.front().probability);

  const auto text_only = generate(synth_preset("text_only"));
  std::vector<double> tab, text;
  for (const auto& t : text_only.truth) {
    double f = 0.0;
    for (const auto& [name, v] : t.feature_contributions) f += v;
    tab.push_back(f);
    text.push_back(t.log_odds - f);
  }
  const double tab_auc = auc_of(tab, text_only.dataset);
  const double text_auc = auc_of(text, text_only.dataset);
  EXPECT_NEAR(tab_auc, 0.5, 1e-12);
  EXPECT_GE(text_auc - tab_auc, 0.15);
}

TEST(Synth, InvalidConfig) {
  auto cfg = synth_preset("balanced");
  cfg.default_rate = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW(synth_preset("nope"), Error);
}

TEST(Synth, RuleBasedRefineShape) {
  const std::vector<Clause> drawn = {{"the shop lost its main supplier", 1.0}, {"sales grew steadily", -1.0}};
  const auto s = parse_sections(rule_based_refine(drawn));
  EXPECT_NE(s.negative.find("main supplier"), std::string::npos);
  EXPECT_NE(s.positive.find("sales grew"), std::string::npos);
}
