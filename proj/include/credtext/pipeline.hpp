#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "credtext/corpus.hpp"
#include "credtext/econ.hpp"
#include "credtext/eval.hpp"
#include "credtext/lda.hpp"
#include "credtext/model.hpp"
#include "credtext/refine.hpp"
#include "credtext/tabular.hpp"
#include "credtext/textfeat.hpp"

namespace credtext {

inline constexpr const char* kVersion = "0.1.0";

struct SynthSection {
  std::string preset = "balanced";
  std::optional<std::size_t> n;
  std::optional<double> default_rate;
  std::optional<std::uint64_t> seed;
  int word_vector_dim = 0;  // 0: no fixture
  int doc_vector_dim = 0;
};

struct StructuredSection {
  int quantile_bins = 5;
  double smoothing = 0.5;
  double iv_min = 0.01;
  double iv_max = 0.50;
  double vif_threshold = 10.0;
};

struct FeaturizerSection {
  std::string type;  // tfidf | lda | wordvec | docvec
  std::string name;  // report label; defaults to type
  int topics = 30;
  std::optional<double> alpha;
  double beta = 0.01;
  int iterations = 500;
  int infer_iterations = 100;
  std::optional<std::uint64_t> seed;
  std::filesystem::path path;                                // wordvec file
  std::map<std::string, std::filesystem::path> paths;        // docvec: text source -> sidecar
  int dim = 0;                                               // docvec
};

struct ModelSection {
  std::vector<std::vector<int>> hidden = {{64}};
  std::vector<double> learning_rate = {1e-3};
  std::vector<int> batch_size = {32};
  int max_epochs = 200;
  int patience = 20;
  Optimizer optimizer = Optimizer::Adam;
  int runs = 5;
  std::vector<std::uint64_t> seeds;  // explicit per-run seeds; empty: derived
};

struct ExplainSection {
  double band_lo = 0.40;
  double band_hi = 0.60;
  std::size_t cases = 250;
  std::string granularity = "phrase";
  int samples = 1000;
  double ridge = 1.0;
  int top_k = 15;
  std::size_t top_units = 15;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path dataset;  // empty: generate from `synth`
  std::filesystem::path schema;
  SynthSection synth;
  SplitOptions split;
  bool split_seed_set = false;
  Tokenizer tokenizer;
  StructuredSection structured;
  std::vector<FeaturizerSection> featurizers;
  std::vector<std::string> text_sources = {"human"};
  ModelSection model;
  std::vector<std::string> metrics = {"auc", "ks", "h", "prauc"};
  int resamples = 1000;
  std::optional<std::uint64_t> bootstrap_seed;
  std::vector<int> topk_reference = {70, 100, 120, 150, 165};
  int topk_reference_n = 738;
  EconConfig econ;
  ExplainSection explain;
  std::filesystem::path dictionary;
  int comparison_tests = 0;
  EndpointConfig endpoint;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir = "out";
  int workers = 1;
  std::string source_hash;  // SHA-256 of the config text
};

/// Parses the JSON config. Unknown keys and wrong types raise ConfigInvalid
/// naming the key path; relative paths resolve against `base_dir`.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<Variant> variant;
  std::optional<std::string> text_source;
  std::optional<int> k;
  std::optional<int> workers;
};

void apply_overrides(PipelineConfig& cfg, const Overrides& o);

/// Checks the referenced files and featurizer inputs needed by `subcommand`.
void validate_config(const PipelineConfig& cfg, const std::string& subcommand);

/// Fitted text featurizer able to embed unseen token lists.
class TextFeaturizer {
 public:
  static TextFeaturizer fit(const FeaturizerSection& section, std::span<const TokenList> train_docs,
                            std::uint64_t seed);

  const std::string& name() const noexcept { return name_; }
  const std::string& type() const noexcept { return type_; }
  bool can_embed() const noexcept { return type_ != "docvec"; }

  /// `doc_index` keys the LDA inference stream so repeated calls agree.
  Eigen::VectorXd embed(const TokenList& tokens, std::size_t doc_index) const;
  FeatureBlock features(std::span<const TokenList> docs, const std::vector<std::string>& ids,
                        const std::string& text_source) const;

 private:
  std::string type_, name_;
  TfidfModel tfidf_;
  std::shared_ptr<LdaModel> lda_;
  int infer_iterations_ = 100;
  std::uint64_t seed_ = 0;
  std::shared_ptr<WordVectors> words_;
  std::map<std::string, std::filesystem::path> docvec_paths_;
  int docvec_dim_ = 0;
};

struct Prepared {
  Dataset dataset;
  SplitIndices split;
  WoeTable woe;
  std::vector<std::string> structured_columns;
  bool iv_fallback = false;
  EncodedMatrix structured;  // all records
  std::map<std::string, std::vector<TokenList>> tokens;  // text source -> per record
  std::vector<TextFeaturizer> featurizers;               // per (featurizer, source), see block_key
  std::map<std::string, FeatureBlock> blocks;            // block_key -> all records
};

std::string block_key(const std::string& featurizer, const std::string& text_source);

Dataset load_or_generate(const PipelineConfig& cfg);
Prepared prepare(const PipelineConfig& cfg, std::ostream* log = nullptr);

struct TrainedCell {
  std::string key;  // "structured" or "<variant>__<featurizer>__<source>"
  Variant variant = Variant::Structured;
  std::string featurizer, text_source;
  std::vector<MlpConfig> chosen;
  std::vector<MlpModel> models;
  std::vector<TrainReport> reports;
  std::vector<ScoredSet> runs;  // test-set scores, one per model seed
  EncodedMatrix design;         // all records, the model's input
};

std::vector<std::uint64_t> model_seeds(const PipelineConfig& cfg);

TrainedCell train_cell(const PipelineConfig& cfg, const Prepared& prep, Variant variant, const std::string& featurizer,
                       const std::string& text_source, std::ostream* log = nullptr);

/// Every requested (featurizer, source, variant) cell. Structured appears once.
std::vector<TrainedCell> train_all(const PipelineConfig& cfg, const Prepared& prep, std::optional<Variant> only_variant,
                                   std::optional<std::string> only_source, std::ostream* log = nullptr);

/// Comparison report: rows = featurizer x text source, columns =
/// structured/text/combined, cells = metric -> bootstrap estimate or null.
std::string evaluation_report(const PipelineConfig& cfg, const std::vector<TrainedCell>& cells,
                              std::optional<Variant> only_variant, std::optional<std::string> only_source);

std::string topk_report(const PipelineConfig& cfg, const std::vector<TrainedCell>& cells, std::optional<int> k);

/// Runs one subcommand end to end and writes its artifacts. Returns the
/// exit status.
int run_subcommand(const std::string& name, PipelineConfig cfg, const Overrides& overrides, std::ostream* log);

}  // namespace credtext
