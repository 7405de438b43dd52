#include "credtext/lda.hpp"

#include <set>

#include "credtext/error.hpp"
#include "credtext/rng.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("textfeat", code, detail); }

int sample_index(Rng& rng, const std::vector<double>& weights, double total) {
  const double u = rng.uniform() * total;
  double acc = 0.0;
  const int k_max = static_cast<int>(weights.size()) - 1;
  for (int k = 0; k < k_max; ++k) {
    acc += weights[static_cast<std::size_t>(k)];
    if (u < acc) return k;
  }
  return k_max;
}

}  // namespace

Eigen::MatrixXd LdaModel::topic_word_distribution() const {
  const int v = vocab_size();
  Eigen::MatrixXd phi(n_topics, v);
  for (int k = 0; k < n_topics; ++k) {
    const double denom = static_cast<double>(topic_totals(k)) + v * beta;
    for (int w = 0; w < v; ++w) phi(k, w) = (static_cast<double>(word_topic(w, k)) + beta) / denom;
  }
  return phi;
}

LdaModel fit_lda(std::span<const TokenList> corpus, const LdaOptions& options) {
  if (options.n_topics < 1) fail(Errc::InvalidTopics, "n_topics must be >= 1");
  std::set<std::string> words;
  for (const auto& doc : corpus) words.insert(doc.begin(), doc.end());
  if (corpus.empty() || words.empty()) fail(Errc::EmptyCorpus, "LDA needs at least one non-empty document");

  LdaModel model;
  model.n_topics = options.n_topics;
  model.alpha = options.alpha.value_or(50.0 / options.n_topics);
  model.beta = options.beta;
  model.iterations = options.iterations;
  model.seed = options.seed;
  int id = 0;
  for (const auto& w : words) model.vocabulary.emplace(w, id++);

  const int K = model.n_topics;
  const int V = model.vocab_size();
  model.word_topic.setZero(V, K);
  model.topic_totals.setZero(K);

  std::vector<std::vector<int>> doc_words(corpus.size());
  std::vector<std::vector<int>> assign(corpus.size());
  std::vector<std::vector<std::int64_t>> doc_topic(corpus.size(), std::vector<std::int64_t>(K, 0));
  Rng rng(options.seed);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (const auto& t : corpus[d]) {
      const int w = model.vocabulary.at(t);
      const int z = static_cast<int>(rng.index(static_cast<std::uint64_t>(K)));
      doc_words[d].push_back(w);
      assign[d].push_back(z);
      ++doc_topic[d][z];
      ++model.word_topic(w, z);
      ++model.topic_totals(z);
    }
  }

  const double vbeta = V * model.beta;
  std::vector<double> p(static_cast<std::size_t>(K));
  for (int it = 0; it < options.iterations; ++it) {
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      auto& nd = doc_topic[d];
      for (std::size_t i = 0; i < doc_words[d].size(); ++i) {
        const int w = doc_words[d][i];
        int z = assign[d][i];
        --nd[z];
        --model.word_topic(w, z);
        --model.topic_totals(z);
        double total = 0.0;
        for (int k = 0; k < K; ++k) {
          const double pk = (static_cast<double>(nd[k]) + model.alpha) *
                            (static_cast<double>(model.word_topic(w, k)) + model.beta) /
                            (static_cast<double>(model.topic_totals(k)) + vbeta);
          p[static_cast<std::size_t>(k)] = pk;
          total += pk;
        }
        z = sample_index(rng, p, total);
        assign[d][i] = z;
        ++nd[z];
        ++model.word_topic(w, z);
        ++model.topic_totals(z);
      }
    }
  }
  return model;
}

Eigen::VectorXd infer_topics(const LdaModel& model, const TokenList& tokens, int iterations, std::uint64_t seed) {
  const int K = model.n_topics;
  std::vector<int> words;
  for (const auto& t : tokens) {
    auto it = model.vocabulary.find(t);
    if (it != model.vocabulary.end()) words.push_back(it->second);
  }
  Eigen::VectorXd theta(K);
  if (words.empty()) {
    theta.setConstant(1.0 / K);
    return theta;
  }
  Rng rng(seed);
  std::vector<int> assign(words.size());
  std::vector<std::int64_t> nd(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    assign[i] = static_cast<int>(rng.index(static_cast<std::uint64_t>(K)));
    ++nd[static_cast<std::size_t>(assign[i])];
  }
  const double vbeta = model.vocab_size() * model.beta;
  std::vector<double> p(static_cast<std::size_t>(K));
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      const int w = words[i];
      --nd[static_cast<std::size_t>(assign[i])];
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        const double pk = (static_cast<double>(nd[static_cast<std::size_t>(k)]) + model.alpha) *
                          (static_cast<double>(model.word_topic(w, k)) + model.beta) /
                          (static_cast<double>(model.topic_totals(k)) + vbeta);
        p[static_cast<std::size_t>(k)] = pk;
        total += pk;
      }
      assign[i] = sample_index(rng, p, total);
      ++nd[static_cast<std::size_t>(assign[i])];
    }
  }
  const double denom = static_cast<double>(words.size()) + K * model.alpha;
  for (int k = 0; k < K; ++k) theta(k) = (static_cast<double>(nd[static_cast<std::size_t>(k)]) + model.alpha) / denom;
  return theta;
}

FeatureBlock lda_features(const LdaModel& model, std::span<const TokenList> docs, const std::vector<std::string>& ids,
                          int iterations, std::uint64_t seed) {
  FeatureBlock block;
  block.source = "lda";
  block.ids = ids;
  block.values.resize(static_cast<Eigen::Index>(docs.size()), model.n_topics);
  for (std::size_t i = 0; i < docs.size(); ++i)
    block.values.row(static_cast<Eigen::Index>(i)) =
        infer_topics(model, docs[i], iterations, derive_seed(seed, {i})).transpose();
  return block;
}

}  // namespace credtext
