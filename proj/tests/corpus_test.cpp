#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "credtext/corpus.hpp"
#include "credtext/error.hpp"
#include "credtext/rng.hpp"
#include "support.hpp"

using namespace credtext;
namespace ts = testing_support;

namespace {

Schema two_feature_schema() {
  return {{"income", FeatureKind::Continuous}, {"grade", FeatureKind::Categorical}};
}

std::string record_line(const std::string& id, int label, const std::string& income = "1.5") {
  return R"({"id":")" + id + R"(","label":)" + std::to_string(label) +
         R"(,"loan_amount":100,"interest_rate":0.1,"term_months":12,"features":{"income":)" + income +
         R"(,"grade":"A"},"human_text":"fine"})";
}

Dataset labelled(std::size_t n, std::size_t positives) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    LoanRecord r;
    r.id = "R" + std::to_string(i);
    r.label = i < positives ? 1 : 0;
    r.human_text = "x";
    d.records.push_back(r);
  }
  return d;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::Io;
}

}  // namespace

TEST(LoadDataset, EmptyFileKeepsSchema) {
  auto dir = ts::temp_dir("corpus-empty");
  ts::write(dir / "d.jsonl", "");
  const auto d = load_dataset(dir / "d.jsonl", two_feature_schema());
  EXPECT_EQ(d.size(), 0u);
  EXPECT_EQ(d.schema.size(), 2u);
}

TEST(LoadDataset, NullBecomesMissing) {
  auto dir = ts::temp_dir("corpus-null");
  ts::write(dir / "d.jsonl", record_line("L001", 0) + "\n" + record_line("L002", 1, "null") + "\n" +
                                 record_line("L003", 0) + "\n");
  const auto d = load_dataset(dir / "d.jsonl", two_feature_schema());
  ASSERT_EQ(d.size(), 3u);
  EXPECT_TRUE(is_missing(d.records[1].features.at("income")));
  EXPECT_DOUBLE_EQ(std::get<double>(d.records[0].features.at("income")), 1.5);
}

TEST(LoadDataset, DuplicateIdIsNamed) {
  auto dir = ts::temp_dir("corpus-dup");
  ts::write(dir / "d.jsonl", record_line("L001", 0) + "\n" + record_line("L001", 1) + "\n");
  try {
    load_dataset(dir / "d.jsonl", two_feature_schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DuplicateId);
    EXPECT_NE(std::string(e.what()).find("L001"), std::string::npos);
  }
}

TEST(LoadDataset, Errors) {
  auto dir = ts::temp_dir("corpus-errors");
  EXPECT_EQ(code_of([&] { load_dataset(dir / "absent.jsonl", two_feature_schema()); }), Errc::MissingFile);

  ts::write(dir / "label.jsonl", record_line("L1", 2) + "\n");
  EXPECT_EQ(code_of([&] { load_dataset(dir / "label.jsonl", two_feature_schema()); }), Errc::InvalidLabel);

  ts::write(dir / "type.jsonl", record_line("L1", 0) + "\n" + record_line("L2", 0, "\"high\"") + "\n");
  try {
    load_dataset(dir / "type.jsonl", two_feature_schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaMismatch);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadDataset, RoundTrip) {
  auto dir = ts::temp_dir("corpus-rt");
  ts::write(dir / "d.jsonl", record_line("L001", 0) + "\n" + record_line("L002", 1, "null") + "\n");
  auto d = load_dataset(dir / "d.jsonl", two_feature_schema());
  d.records[0].refined_texts["positive"] = "good";
  save_dataset(dir / "e.jsonl", d);
  const auto e = load_dataset(dir / "e.jsonl", two_feature_schema());
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e.records[0].refined_texts.at("positive"), "good");
  EXPECT_TRUE(is_missing(e.records[1].features.at("income")));
  save_schema(dir / "s.json", two_feature_schema());
  const auto s = load_schema(dir / "s.json");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].kind, FeatureKind::Categorical);
}

TEST(StratifiedSplit, ReferenceSizes) {
  const auto d = labelled(2460, 60);
  const auto s = stratified_split(d, {0.7, 0.2, 7, true});
  EXPECT_EQ(s.train.size(), 1377u);
  EXPECT_EQ(s.val.size(), 345u);
  EXPECT_EQ(s.test.size(), 738u);
}

TEST(StratifiedSplit, TinyWithoutValidation) {
  const auto d = labelled(10, 5);
  EXPECT_EQ(code_of([&] { stratified_split(d, {0.7, 0.0, 1, true}); }), Errc::DegenerateSplit);
  const auto s = stratified_split(d, {0.7, 0.0, 1, false});
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_TRUE(s.val.empty());
  EXPECT_EQ(s.test.size(), 3u);
}

TEST(StratifiedSplit, Deterministic) {
  const auto d = labelled(300, 40);
  const auto a = stratified_split(d, {0.7, 0.2, 99, true});
  const auto b = stratified_split(d, {0.7, 0.2, 99, true});
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
}

// Random sizes and label mixes: the three sets partition the rows and each
// label's share of the test set stays near the requested fraction.
TEST(StratifiedSplitProperty, PartitionAndStratification) {
  Rng rng(20240601);
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t n = 10 + rng.index(400);
    const std::size_t pos = 2 + rng.index(n / 2);
    const double train_frac = 0.5 + 0.4 * rng.uniform();
    const auto d = labelled(n, pos);
    SplitIndices s;
    try {
      s = stratified_split(d, {train_frac, 0.2, rng.next(), false});
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), Errc::DegenerateSplit);
      continue;
    }
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
      all.insert(all.end(), part->begin(), part->end());
    }
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), n);
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);

    EXPECT_EQ(s.test.size(), static_cast<std::size_t>(std::llround(n * (1.0 - train_frac))));
    std::size_t test_pos = 0;
    for (auto i : s.test) test_pos += d.records[i].label;
    const double want = (1.0 - train_frac) * static_cast<double>(pos);
    EXPECT_LE(std::abs(static_cast<double>(test_pos) - want), 1.5) << "n " << n << " pos " << pos;
  }
}

TEST(TextLengthStats, Examples) {
  Tokenizer tok;
  Dataset d = labelled(1, 0);
  d.records[0].human_text = "one two three four five";
  auto stats = text_length_stats(d, "human", tok);
  EXPECT_EQ(stats.at(0).count, 1u);
  EXPECT_DOUBLE_EQ(stats.at(0).mean, 5.0);
  EXPECT_DOUBLE_EQ(stats.at(0).sd, 0.0);

  d = labelled(2, 0);
  d.records[0].human_text = "a b c d";
  d.records[1].human_text = "a b c d e f";
  stats = text_length_stats(d, "human", tok);
  EXPECT_DOUBLE_EQ(stats.at(0).mean, 5.0);
  EXPECT_NEAR(stats.at(0).sd, std::sqrt(2.0), 1e-12);

  d = labelled(3, 1);
  std::string ten, twenty;
  for (int i = 0; i < 10; ++i) ten += "w ";
  for (int i = 0; i < 20; ++i) twenty += "w ";
  d.records[0].human_text = twenty;
  d.records[1].human_text = ten;
  d.records[2].human_text = ten;
  stats = text_length_stats(d, "human", tok);
  EXPECT_DOUBLE_EQ(stats.at(0).mean, 10.0);
  EXPECT_DOUBLE_EQ(stats.at(0).sd, 0.0);
  EXPECT_DOUBLE_EQ(stats.at(1).mean, 20.0);
}
