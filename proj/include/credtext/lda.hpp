#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "credtext/textfeat.hpp"

namespace credtext {

struct LdaOptions {
  int n_topics = 30;
  std::optional<double> alpha;  // symmetric document-topic prior; default 50 / n_topics
  double beta = 0.01;           // symmetric topic-word prior
  int iterations = 500;
  std::uint64_t seed = 0;
};

/// Topic model fitted by collapsed Gibbs sampling. Counts are kept word-major
/// (V x K) so one sampling step reads a contiguous row.
struct LdaModel {
  int n_topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> vocabulary;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> word_topic;  // V x K
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> topic_totals;                               // K

  int vocab_size() const noexcept { return static_cast<int>(vocabulary.size()); }

  /// phi(k, w) = (n_kw + beta) / (n_k + V beta); each row sums to 1.
  Eigen::MatrixXd topic_word_distribution() const;
};

LdaModel fit_lda(std::span<const TokenList> corpus, const LdaOptions& options);

/// Topic proportions of one document after `iterations` Gibbs sweeps with the
/// model's topic-word counts held fixed. Unknown tokens are skipped; an
/// empty document gets the uniform prior.
Eigen::VectorXd infer_topics(const LdaModel& model, const TokenList& tokens, int iterations, std::uint64_t seed);

/// Row i is infer_topics(docs[i]) with a per-document seed derived from `seed`.
FeatureBlock lda_features(const LdaModel& model, std::span<const TokenList> docs, const std::vector<std::string>& ids,
                          int iterations, std::uint64_t seed);

}  // namespace credtext
