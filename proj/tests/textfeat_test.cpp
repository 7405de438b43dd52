#include <gtest/gtest.h>

#include <cmath>

#include "credtext/error.hpp"
#include "credtext/lda.hpp"
#include "credtext/lingcomp.hpp"
#include "credtext/textfeat.hpp"
#include "credtext/tokenize.hpp"
#include "support.hpp"

using namespace credtext;
namespace ts = testing_support;

namespace {

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

TEST(Tokenizer, Examples) {
  Tokenizer word;
  EXPECT_EQ(word("Good repayment history."), (std::vector<std::string>{"good", "repayment", "history"}));
  EXPECT_TRUE(word("").empty());
  Tokenizer chars{TokenMode::Char, true};
  EXPECT_EQ(chars("还款良好"), (std::vector<std::string>{"还", "款", "良", "好"}));
  EXPECT_EQ(chars("还款，良好。"), (std::vector<std::string>{"还", "款", "良", "好"}));
  Tokenizer keep_case{TokenMode::Word, false};
  EXPECT_EQ(keep_case("Good, Bad"), (std::vector<std::string>{"Good", "Bad"}));
}

TEST(Tfidf, SingleDocument) {
  const std::vector<TokenList> corpus = {{"a", "b", "b", "c"}};
  const auto m = fit_tfidf(corpus);
  ASSERT_EQ(m.size(), 3);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(m.idf(i), 1.0);
  const auto v = transform(m, corpus[0]);
  EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  const double norm = std::sqrt(1.0 + 4.0 + 1.0);
  EXPECT_NEAR(v.coeff(m.vocabulary.at("b")), 2.0 / norm, 1e-12);
  EXPECT_NEAR(v.coeff(m.vocabulary.at("a")), 1.0 / norm, 1e-12);
}

TEST(Tfidf, IdfFormula) {
  const std::vector<TokenList> corpus = {{"a", "b"}, {"a"}, {"c"}};
  const auto m = fit_tfidf(corpus);
  EXPECT_NEAR(m.idf(m.vocabulary.at("a")), std::log(4.0 / 3.0) + 1.0, 1e-12);
  EXPECT_NEAR(m.idf(m.vocabulary.at("c")), std::log(4.0 / 2.0) + 1.0, 1e-12);
}

TEST(Tfidf, OovAndIdentical) {
  const std::vector<TokenList> corpus = {{"a", "b"}, {"b", "c"}};
  const auto m = fit_tfidf(corpus);
  EXPECT_EQ(transform(m, {"zzz", "yyy"}).norm(), 0.0);
  const auto u = transform(m, {"a", "c"});
  const auto v = transform(m, {"a", "c"});
  EXPECT_NEAR(cosine_similarity(u, v), 1.0, 1e-12);
  EXPECT_EQ(code_of([] { fit_tfidf(std::vector<TokenList>{}); }), Errc::EmptyCorpus);
}

TEST(WordVectors, AverageEmbedding) {
  auto dir = ts::temp_dir("wordvec");
  ts::write(dir / "v.txt", "2 2\na 1 0\nb 0 1\n");
  const auto table = load_word_vectors(dir / "v.txt");
  EXPECT_EQ(table.dim(), 2);
  EXPECT_TRUE(avg_embed(table, {"a", "b"}).isApprox(Eigen::Vector2d(0.5, 0.5)));
  EXPECT_TRUE(avg_embed(table, {"a", "a", "b"}).isApprox(Eigen::Vector2d(2.0 / 3.0, 1.0 / 3.0)));
  EXPECT_EQ(avg_embed(table, {"zzz"}), Eigen::Vector2d::Zero());
  EXPECT_EQ(avg_embed(table, {}), Eigen::Vector2d::Zero());
}

TEST(WordVectors, FileErrors) {
  auto dir = ts::temp_dir("wordvec-err");
  EXPECT_EQ(code_of([&] { load_word_vectors(dir / "absent.txt"); }), Errc::MissingFile);
  ts::write(dir / "short.txt", "1 3\na 1 2\n");
  EXPECT_EQ(code_of([&] { load_word_vectors(dir / "short.txt"); }), Errc::DimMismatch);
  ts::write(dir / "bad.txt", "1 2\na 1 x\n");
  EXPECT_EQ(code_of([&] { load_word_vectors(dir / "bad.txt"); }), Errc::MalformedLine);
  ts::write(dir / "nohead.txt", "");
  EXPECT_EQ(code_of([&] { load_word_vectors(dir / "nohead.txt"); }), Errc::MalformedLine);
}

TEST(DocVectors, LoadAndErrors) {
  auto dir = ts::temp_dir("docvec");
  ts::write(dir / "d.tsv", "L1\t1 2 3 4\nL2\t5 6 7 8\n");
  const auto t = load_doc_vectors(dir / "d.tsv", 4, {"L1", "L2"});
  EXPECT_EQ(t.size(), 2u);
  EXPECT_DOUBLE_EQ(t.at("L2")(3), 8.0);
  try {
    load_doc_vectors(dir / "d.tsv", 4, {"L1", "L3"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingId);
    EXPECT_NE(std::string(e.what()).find("L3"), std::string::npos);
  }
  ts::write(dir / "short.tsv", "L1\t1 2 3\n");
  try {
    load_doc_vectors(dir / "short.tsv", 4, {"L1"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimMismatch);
    EXPECT_NE(std::string(e.what()).find("L1"), std::string::npos);
  }
  ts::write(dir / "nan.tsv", "L1\t1 nan 3 4\n");
  EXPECT_EQ(code_of([&] { load_doc_vectors(dir / "nan.tsv", 4, {"L1"}); }), Errc::NonFiniteValue);
}

TEST(DocVectors, RoundTrip) {
  auto dir = ts::temp_dir("docvec-rt");
  FeatureBlock b;
  b.ids = {"x", "y"};
  b.values = Eigen::MatrixXd::Random(2, 3);
  save_doc_vectors(dir / "o.tsv", b);
  const auto t = load_doc_vectors(dir / "o.tsv", 3, b.ids);
  EXPECT_TRUE(t.at("y").isApprox(b.values.row(1).transpose(), 1e-15));
}

TEST(Truncation, Flags) {
  const std::vector<TokenList> docs = {TokenList(512, "a"), TokenList(513, "a")};
  EXPECT_EQ(truncation_flags(docs), (std::vector<bool>{false, true}));
}

TEST(Lda, SingleTopic) {
  const auto corpus = gen::disjoint_corpus(1, 20, 20);
  const auto model = fit_lda(corpus, {1, std::nullopt, 0.01, 20, 3});
  EXPECT_DOUBLE_EQ(infer_topics(model, corpus[0], 10, 1)(0), 1.0);
  EXPECT_DOUBLE_EQ(infer_topics(model, {}, 10, 1)(0), 1.0);
}

TEST(Lda, EmptyDocumentIsUniform) {
  const auto corpus = gen::disjoint_corpus(2, 20, 20);
  const auto model = fit_lda(corpus, {4, std::nullopt, 0.01, 20, 3});
  const auto theta = infer_topics(model, {}, 10, 1);
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(theta(k), 0.25);
}

TEST(Lda, DeterministicCounts) {
  const auto corpus = gen::disjoint_corpus(3, 40, 30);
  const LdaOptions opt{2, 0.1, 0.01, 30, 11};
  const auto a = fit_lda(corpus, opt);
  const auto b = fit_lda(corpus, opt);
  EXPECT_EQ(a.word_topic, b.word_topic);
  EXPECT_EQ(a.topic_totals, b.topic_totals);
}

TEST(Lda, DistributionsSumToOne) {
  const auto corpus = gen::disjoint_corpus(4, 40, 30);
  const auto model = fit_lda(corpus, {3, std::nullopt, 0.01, 30, 5});
  const auto phi = model.topic_word_distribution();
  for (Eigen::Index k = 0; k < phi.rows(); ++k) EXPECT_NEAR(phi.row(k).sum(), 1.0, 1e-12);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < corpus.size(); ++i) ids.push_back(std::to_string(i));
  const auto block = lda_features(model, corpus, ids, 20, 9);
  for (Eigen::Index i = 0; i < block.values.rows(); ++i) EXPECT_NEAR(block.values.row(i).sum(), 1.0, 1e-12);
  EXPECT_EQ(block.values, lda_features(model, corpus, ids, 20, 9).values);
}

TEST(Lda, RecoversDisjointTopics) {
  const auto corpus = gen::disjoint_corpus(5);
  const auto model = fit_lda(corpus, {2, 0.1, 0.01, 200, 17});
  const auto a = infer_topics(model, corpus.front(), 50, 1);
  const auto b = infer_topics(model, corpus.back(), 50, 1);
  Eigen::Index ka, kb;
  EXPECT_GT(a.maxCoeff(&ka), 0.9);
  EXPECT_GT(b.maxCoeff(&kb), 0.9);
  EXPECT_NE(ka, kb);
}

TEST(Lda, Errors) {
  const auto corpus = gen::disjoint_corpus(6, 4, 4);
  EXPECT_EQ(code_of([&] { fit_lda(corpus, {0, std::nullopt}); }), Errc::InvalidTopics);
  EXPECT_EQ(code_of([&] { fit_lda(std::vector<TokenList>{{}}, {2, std::nullopt}); }), Errc::EmptyCorpus);
}
