#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "credtext/tokenize.hpp"

namespace credtext {

using TokenList = std::vector<std::string>;

/// Fixed-dimension document features from one featurizer, one row per id.
/// `source` is "lda", "wordvec", "tfidf" or "docvec:<name>".
struct FeatureBlock {
  std::string source;
  std::vector<std::string> ids;
  Eigen::MatrixXd values;

  Eigen::Index dim() const noexcept { return values.cols(); }
};

// ---------------------------------------------------------------- TF-IDF

struct TfidfModel {
  std::map<std::string, int> vocabulary;  // token -> column, dense 0..V-1 in token order
  Eigen::VectorXd idf;
  std::size_t doc_count = 0;

  int size() const noexcept { return static_cast<int>(vocabulary.size()); }
};

/// idf = ln((1 + N) / (1 + df)) + 1
TfidfModel fit_tfidf(std::span<const TokenList> corpus);

/// Raw-count tf times idf, L2-normalised. Out-of-vocabulary tokens are
/// ignored; an all-OOV document maps to the zero vector.
Eigen::SparseVector<double> transform(const TfidfModel& model, const TokenList& tokens);

FeatureBlock tfidf_features(const TfidfModel& model, std::span<const TokenList> docs,
                            const std::vector<std::string>& ids);

// ---------------------------------------------------------- word vectors

class WordVectors {
 public:
  WordVectors() = default;
  explicit WordVectors(int dim) : dim_(dim) {}

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return index_.size(); }
  void add(const std::string& word, const Eigen::VectorXd& v);
  const Eigen::VectorXd* find(const std::string& word) const;

 private:
  int dim_ = 0;
  std::map<std::string, std::size_t> index_;
  std::vector<Eigen::VectorXd> vectors_;
};

/// Text format: header "<count> <dim>", then "<word> v1 ... v_dim" per line.
WordVectors load_word_vectors(const std::filesystem::path& path);

/// Mean of in-vocabulary token vectors; zero vector when none is known.
Eigen::VectorXd avg_embed(const WordVectors& table, const TokenList& tokens);

FeatureBlock wordvec_features(const WordVectors& table, std::span<const TokenList> docs,
                              const std::vector<std::string>& ids);

// ------------------------------------------------------ document vectors

/// Sidecar format: "<id>\tv1 v2 ... v_dim" per line. Every requested id must
/// be present with exactly `expected_dim` finite values.
std::map<std::string, Eigen::VectorXd> load_doc_vectors(const std::filesystem::path& path, int expected_dim,
                                                         const std::vector<std::string>& requested_ids);

void save_doc_vectors(const std::filesystem::path& path, const FeatureBlock& block);

FeatureBlock docvec_features(const std::string& name, const std::map<std::string, Eigen::VectorXd>& table,
                             const std::vector<std::string>& ids);

/// Whether each document exceeds `max_tokens` and would have been cut by a
/// length-limited upstream encoder.
std::vector<bool> truncation_flags(std::span<const TokenList> docs, std::size_t max_tokens = 512);

}  // namespace credtext
