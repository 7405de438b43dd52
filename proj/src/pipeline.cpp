#include "credtext/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "credtext/error.hpp"
#include "credtext/explain.hpp"
#include "credtext/hash.hpp"
#include "credtext/lingcomp.hpp"
#include "credtext/rng.hpp"
#include "credtext/synthgen.hpp"

namespace credtext {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("cli", code, detail); }

// Seed tags for components whose seed is derived from the master seed.
enum SeedTag : std::uint64_t { kSplitTag = 1, kModelTag = 2, kBootstrapTag = 3, kFeaturizerTag = 4, kLimeTag = 5 };

// ------------------------------------------------------------ config reader

class Reader {
 public:
  Reader(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) invalid(path_.empty() ? "<root>" : path_, "expected an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : node_.items())
      if (!used_.count(key)) invalid(child(key), "unknown key");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const Json* take(const std::string& key) {
    if (!node_.contains(key)) return nullptr;
    used_.insert(key);
    return &node_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const Json* v = take(key)) out = convert<T>(*v, child(key));
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (const Json* v = take(key)) out = convert<T>(*v, child(key));
  }

  void get_path(const std::string& key, fs::path& out, const fs::path& base) {
    if (const Json* v = take(key)) {
      fs::path p = convert<std::string>(*v, child(key));
      out = p.is_absolute() ? p : base / p;
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void invalid(const std::string& where, const std::string& what) {
    fail(Errc::ConfigInvalid, where + ": " + what);
  }

  template <typename T>
  static T convert(const Json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) invalid(where, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) invalid(where, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) invalid(where, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
        if (v.get<std::int64_t>() < 0) invalid(where, "expected a non-negative integer");
        return static_cast<T>(v.get<std::int64_t>());
      } else {
        return static_cast<T>(v.get<std::int64_t>());
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) invalid(where, "expected a number");
      return v.get<T>();
    } else {
      // std::vector<U>
      if (!v.is_array()) invalid(where, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> used_;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::MissingFile, path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::Io, "cannot write " + path.string());
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

void say(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n' << std::flush;
}

}  // namespace

// ------------------------------------------------------------------ config

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(Errc::ConfigInvalid, std::string("<root>: not valid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  cfg.source_hash = sha256_hex(text);
  Reader r(root, "");
  r.get("seed", cfg.seed);
  r.get("workers", cfg.workers);
  r.get_path("output_dir", cfg.output_dir, base_dir);

  if (const Json* node = r.take("data")) {
    Reader d(*node, "data");
    d.get_path("dataset", cfg.dataset, base_dir);
    d.get_path("schema", cfg.schema, base_dir);
    if (cfg.dataset.empty() != cfg.schema.empty())
      Reader::invalid("data", "dataset and schema must be given together");
  }
  if (const Json* node = r.take("synth")) {
    Reader s(*node, "synth");
    s.get("preset", cfg.synth.preset);
    s.get("n", cfg.synth.n);
    s.get("default_rate", cfg.synth.default_rate);
    s.get("seed", cfg.synth.seed);
    s.get("word_vector_dim", cfg.synth.word_vector_dim);
    s.get("doc_vector_dim", cfg.synth.doc_vector_dim);
  }
  if (const Json* node = r.take("split")) {
    Reader s(*node, "split");
    s.get("train_frac", cfg.split.train_frac);
    s.get("val_frac", cfg.split.val_frac_of_train);
    if (s.has("seed")) {
      s.get("seed", cfg.split.seed);
      cfg.split_seed_set = true;
    }
  }
  if (const Json* node = r.take("tokenizer")) {
    Reader t(*node, "tokenizer");
    std::string mode = "word";
    t.get("mode", mode);
    if (mode == "word")
      cfg.tokenizer.mode = TokenMode::Word;
    else if (mode == "char")
      cfg.tokenizer.mode = TokenMode::Char;
    else
      Reader::invalid("tokenizer.mode", "expected 'word' or 'char'");
    t.get("lowercase", cfg.tokenizer.lowercase);
  }
  if (const Json* node = r.take("structured")) {
    Reader s(*node, "structured");
    s.get("quantile_bins", cfg.structured.quantile_bins);
    s.get("smoothing", cfg.structured.smoothing);
    s.get("iv_min", cfg.structured.iv_min);
    s.get("iv_max", cfg.structured.iv_max);
    s.get("vif_threshold", cfg.structured.vif_threshold);
  }
  if (const Json* node = r.take("featurizers")) {
    if (!node->is_array()) Reader::invalid("featurizers", "expected an array");
    for (std::size_t i = 0; i < node->size(); ++i) {
      const std::string where = "featurizers[" + std::to_string(i) + "]";
      Reader f((*node)[i], where);
      FeaturizerSection sec;
      f.get("type", sec.type);
      if (sec.type != "tfidf" && sec.type != "lda" && sec.type != "wordvec" && sec.type != "docvec")
        Reader::invalid(where + ".type", "expected tfidf, lda, wordvec or docvec");
      sec.name = sec.type;
      f.get("name", sec.name);
      f.get("topics", sec.topics);
      f.get("alpha", sec.alpha);
      f.get("beta", sec.beta);
      f.get("iterations", sec.iterations);
      f.get("infer_iterations", sec.infer_iterations);
      f.get("seed", sec.seed);
      f.get_path("path", sec.path, base_dir);
      f.get("dim", sec.dim);
      if (const Json* paths = f.take("paths")) {
        if (!paths->is_object()) Reader::invalid(where + ".paths", "expected an object");
        for (const auto& [source, p] : paths->items()) {
          fs::path path = Reader::convert<std::string>(p, where + ".paths." + source);
          sec.paths[source] = path.is_absolute() ? path : base_dir / path;
        }
      }
      for (const auto& other : cfg.featurizers)
        if (other.name == sec.name) Reader::invalid(where + ".name", "duplicate featurizer name '" + sec.name + "'");
      cfg.featurizers.push_back(std::move(sec));
    }
  }
  r.get("text_sources", cfg.text_sources);
  if (const Json* node = r.take("model")) {
    Reader m(*node, "model");
    m.get("hidden", cfg.model.hidden);
    m.get("learning_rate", cfg.model.learning_rate);
    m.get("batch_size", cfg.model.batch_size);
    m.get("max_epochs", cfg.model.max_epochs);
    m.get("patience", cfg.model.patience);
    std::string opt = "adam";
    m.get("optimizer", opt);
    if (opt == "adam")
      cfg.model.optimizer = Optimizer::Adam;
    else if (opt == "sgd")
      cfg.model.optimizer = Optimizer::Sgd;
    else
      Reader::invalid("model.optimizer", "expected 'adam' or 'sgd'");
    m.get("runs", cfg.model.runs);
    m.get("seeds", cfg.model.seeds);
  }
  r.get("metrics", cfg.metrics);
  if (const Json* node = r.take("bootstrap")) {
    Reader b(*node, "bootstrap");
    b.get("resamples", cfg.resamples);
    b.get("seed", cfg.bootstrap_seed);
  }
  if (const Json* node = r.take("topk")) {
    Reader t(*node, "topk");
    t.get("reference", cfg.topk_reference);
    t.get("reference_n", cfg.topk_reference_n);
  }
  if (const Json* node = r.take("econ")) {
    Reader e(*node, "econ");
    e.get("lgd", cfg.econ.lgd);
  }
  if (const Json* node = r.take("explain")) {
    Reader e(*node, "explain");
    e.get("band_lo", cfg.explain.band_lo);
    e.get("band_hi", cfg.explain.band_hi);
    e.get("cases", cfg.explain.cases);
    e.get("granularity", cfg.explain.granularity);
    e.get("samples", cfg.explain.samples);
    e.get("ridge", cfg.explain.ridge);
    e.get("top_k", cfg.explain.top_k);
    e.get("top_units", cfg.explain.top_units);
    if (cfg.explain.granularity != "word" && cfg.explain.granularity != "phrase")
      Reader::invalid("explain.granularity", "expected 'word' or 'phrase'");
  }
  if (const Json* node = r.take("compare")) {
    Reader c(*node, "compare");
    c.get_path("dictionary", cfg.dictionary, base_dir);
    c.get("tests", cfg.comparison_tests);
  }
  if (const Json* node = r.take("refine")) {
    Reader e(*node, "refine");
    e.get("base_url", cfg.endpoint.base_url);
    e.get("model", cfg.endpoint.model);
    e.get("temperature", cfg.endpoint.temperature);
    e.get("timeout_seconds", cfg.endpoint.timeout_seconds);
    e.get("max_retries", cfg.endpoint.max_retries);
    e.get("rpm_cap", cfg.endpoint.rpm_cap);
    e.get("api_key_env", cfg.endpoint.api_key_env);
    e.get("max_in_flight", cfg.endpoint.max_in_flight);
    e.get("backoff_base_seconds", cfg.endpoint.backoff_base_seconds);
    e.get_path("cache_dir", cfg.cache_dir, base_dir);
  }

  if (cfg.workers < 1) Reader::invalid("workers", "must be >= 1");
  if (cfg.model.runs < 1) Reader::invalid("model.runs", "must be >= 1");
  if (!cfg.model.seeds.empty() && static_cast<int>(cfg.model.seeds.size()) != cfg.model.runs)
    Reader::invalid("model.seeds", "must list exactly model.runs seeds");
  if (cfg.model.hidden.empty() || cfg.model.learning_rate.empty() || cfg.model.batch_size.empty())
    Reader::invalid("model", "grid axes must be non-empty");
  if (cfg.resamples < 1) Reader::invalid("bootstrap.resamples", "must be >= 1");
  if (cfg.text_sources.empty()) Reader::invalid("text_sources", "must be non-empty");
  for (std::size_t i = 0; i < cfg.text_sources.size(); ++i)
    if (cfg.text_sources[i] != "human" && !is_refined_tag(cfg.text_sources[i]))
      Reader::invalid("text_sources[" + std::to_string(i) + "]", "unknown text source '" + cfg.text_sources[i] + "'");
  for (std::size_t i = 0; i < cfg.metrics.size(); ++i) {
    try {
      metric_by_name(cfg.metrics[i]);
    } catch (const Error&) {
      Reader::invalid("metrics[" + std::to_string(i) + "]", "unknown metric '" + cfg.metrics[i] + "'");
    }
  }
  if (!(cfg.econ.lgd >= 0.0 && cfg.econ.lgd <= 1.0)) Reader::invalid("econ.lgd", "must lie in [0, 1]");
  if (cfg.topk_reference_n < 1) Reader::invalid("topk.reference_n", "must be >= 1");
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::MissingFile, path.string());
  return parse_config(read_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void apply_overrides(PipelineConfig& cfg, const Overrides& o) {
  if (o.out) cfg.output_dir = *o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) {
    if (*o.workers < 1) fail(Errc::ConfigInvalid, "--workers: must be >= 1");
    cfg.workers = *o.workers;
  }
  if (o.text_source) {
    if (*o.text_source != "human" && !is_refined_tag(*o.text_source))
      fail(Errc::ConfigInvalid, "--text-source: unknown text source '" + *o.text_source + "'");
    if (std::find(cfg.text_sources.begin(), cfg.text_sources.end(), *o.text_source) == cfg.text_sources.end())
      cfg.text_sources.push_back(*o.text_source);
  }
}

void validate_config(const PipelineConfig& cfg, const std::string& subcommand) {
  const bool uses_data = subcommand != "synth";
  if (uses_data && !cfg.dataset.empty()) {
    if (!fs::exists(cfg.dataset)) fail(Errc::ConfigInvalid, "data.dataset: file not found: " + cfg.dataset.string());
    if (!fs::exists(cfg.schema)) fail(Errc::ConfigInvalid, "data.schema: file not found: " + cfg.schema.string());
  }
  const bool uses_text = subcommand == "featurize" || subcommand == "train" || subcommand == "evaluate" ||
                         subcommand == "explain" || subcommand == "profit";
  if (uses_text) {
    if (cfg.featurizers.empty()) fail(Errc::ConfigInvalid, "featurizers: at least one featurizer is required");
    for (std::size_t i = 0; i < cfg.featurizers.size(); ++i) {
      const auto& f = cfg.featurizers[i];
      const std::string where = "featurizers[" + std::to_string(i) + "]";
      if (f.type == "wordvec" && !fs::exists(f.path))
        fail(Errc::ConfigInvalid, where + ".path: file not found: " + f.path.string());
      if (f.type == "docvec") {
        if (f.dim < 1) fail(Errc::ConfigInvalid, where + ".dim: docvec needs a positive dim");
        for (const auto& source : cfg.text_sources) {
          const auto it = f.paths.find(source);
          if (it == f.paths.end())
            fail(Errc::ConfigInvalid, where + ".paths." + source + ": docvec needs a sidecar per text source");
          if (!fs::exists(it->second))
            fail(Errc::ConfigInvalid, where + ".paths." + source + ": file not found: " + it->second.string());
        }
      }
      if (f.type == "lda" && f.topics < 1) fail(Errc::ConfigInvalid, where + ".topics: must be >= 1");
    }
  }
  if (subcommand == "compare" && !cfg.dictionary.empty() && !fs::exists(cfg.dictionary))
    fail(Errc::ConfigInvalid, "compare.dictionary: file not found: " + cfg.dictionary.string());
  if (subcommand == "refine" && cfg.cache_dir.empty())
    fail(Errc::ConfigInvalid, "refine.cache_dir: required for the refine subcommand");
}

// -------------------------------------------------------------- featurizers

TextFeaturizer TextFeaturizer::fit(const FeaturizerSection& section, std::span<const TokenList> train_docs,
                                   std::uint64_t seed) {
  TextFeaturizer f;
  f.type_ = section.type;
  f.name_ = section.name;
  f.seed_ = section.seed.value_or(seed);
  f.infer_iterations_ = section.infer_iterations;
  if (section.type == "tfidf") {
    f.tfidf_ = fit_tfidf(train_docs);
  } else if (section.type == "lda") {
    LdaOptions opt;
    opt.n_topics = section.topics;
    opt.alpha = section.alpha;
    opt.beta = section.beta;
    opt.iterations = section.iterations;
    opt.seed = f.seed_;
    f.lda_ = std::make_shared<LdaModel>(fit_lda(train_docs, opt));
  } else if (section.type == "wordvec") {
    f.words_ = std::make_shared<WordVectors>(load_word_vectors(section.path));
  } else if (section.type == "docvec") {
    f.docvec_paths_ = section.paths;
    f.docvec_dim_ = section.dim;
  } else {
    fail(Errc::ConfigInvalid, "unknown featurizer type '" + section.type + "'");
  }
  return f;
}

Eigen::VectorXd TextFeaturizer::embed(const TokenList& tokens, std::size_t doc_index) const {
  if (type_ == "tfidf") return Eigen::VectorXd(transform(tfidf_, tokens));
  if (type_ == "lda") return infer_topics(*lda_, tokens, infer_iterations_, derive_seed(seed_, {doc_index}));
  if (type_ == "wordvec") return avg_embed(*words_, tokens);
  fail(Errc::InvalidConfig, "featurizer '" + name_ + "' cannot embed new text");
}

FeatureBlock TextFeaturizer::features(std::span<const TokenList> docs, const std::vector<std::string>& ids,
                                      const std::string& text_source) const {
  FeatureBlock block;
  if (type_ == "tfidf") {
    block = tfidf_features(tfidf_, docs, ids);
  } else if (type_ == "lda") {
    block = lda_features(*lda_, docs, ids, infer_iterations_, seed_);
  } else if (type_ == "wordvec") {
    block = wordvec_features(*words_, docs, ids);
  } else {
    const auto it = docvec_paths_.find(text_source);
    if (it == docvec_paths_.end()) fail(Errc::ConfigInvalid, "no docvec sidecar for text source '" + text_source + "'");
    block = docvec_features(name_, load_doc_vectors(it->second, docvec_dim_, ids), ids);
  }
  block.source = name_;
  return block;
}

std::string block_key(const std::string& featurizer, const std::string& text_source) {
  return featurizer + "__" + text_source;
}

// ----------------------------------------------------------------- prepare

namespace {

SynthConfig synth_config(const PipelineConfig& cfg) {
  SynthConfig s = synth_preset(cfg.synth.preset);
  if (cfg.synth.n) s.n = *cfg.synth.n;
  if (cfg.synth.default_rate) s.default_rate = *cfg.synth.default_rate;
  s.seed = cfg.synth.seed.value_or(cfg.seed);
  return s;
}

std::uint64_t split_seed(const PipelineConfig& cfg) {
  return cfg.split_seed_set ? cfg.split.seed : derive_seed(cfg.seed, {kSplitTag});
}

std::uint64_t bootstrap_seed(const PipelineConfig& cfg) {
  return cfg.bootstrap_seed.value_or(derive_seed(cfg.seed, {kBootstrapTag}));
}

}  // namespace

Dataset load_or_generate(const PipelineConfig& cfg) {
  if (!cfg.dataset.empty()) return load_dataset(cfg.dataset, load_schema(cfg.schema));
  return generate(synth_config(cfg)).dataset;
}

Prepared prepare(const PipelineConfig& cfg, std::ostream* log) {
  Prepared p;
  p.dataset = load_or_generate(cfg);
  say(log, "data: " + std::to_string(p.dataset.size()) + " records");

  SplitOptions so = cfg.split;
  so.seed = split_seed(cfg);
  p.split = stratified_split(p.dataset, so);
  say(log, "split: train " + std::to_string(p.split.train.size()) + ", val " + std::to_string(p.split.val.size()) +
               ", test " + std::to_string(p.split.test.size()));

  const Dataset imputed = impute(p.dataset, p.split.train);
  const BinningSpec binning = fit_binning(imputed, p.split.train, cfg.structured.quantile_bins);
  p.woe = fit_woe(imputed, p.split.train, binning, cfg.structured.smoothing);
  std::vector<std::string> selected = select_by_iv(p.woe, cfg.structured.iv_min, cfg.structured.iv_max);
  if (selected.empty()) {
    // nothing clears the IV band: keep every feature rather than an empty block
    p.iv_fallback = true;
    for (const auto& f : p.woe.features) selected.push_back(f.binning.name);
  }
  const EncodedMatrix encoded = encode(imputed, p.woe, selected);
  p.structured_columns = vif_filter(select_rows(encoded, p.split.train), cfg.structured.vif_threshold);
  p.structured = select_columns(encoded, p.structured_columns);
  say(log, "structured: " + std::to_string(p.structured_columns.size()) + " WoE columns");

  const auto ids = p.dataset.ids();
  for (const auto& source : cfg.text_sources) {
    auto& docs = p.tokens[source];
    docs.reserve(p.dataset.size());
    for (const auto& rec : p.dataset.records) {
      const std::string* text = select_text(rec, source);
      if (text == nullptr) fail(Errc::MissingText, "record " + rec.id + " has no '" + source + "' text");
      docs.push_back(cfg.tokenizer(*text));
    }
    std::vector<TokenList> train_docs;
    for (std::size_t i : p.split.train) train_docs.push_back(docs[i]);
    for (const auto& sec : cfg.featurizers) {
      const std::uint64_t seed = derive_seed(cfg.seed, {kFeaturizerTag, fnv1a(sec.name)});
      auto f = TextFeaturizer::fit(sec, train_docs, seed);
      p.blocks[block_key(sec.name, source)] = f.features(docs, ids, source);
      p.featurizers.push_back(std::move(f));
      say(log, "featurize: " + sec.name + " on " + source + " -> " +
                   std::to_string(p.blocks[block_key(sec.name, source)].dim()) + " columns");
    }
  }
  return p;
}

// ------------------------------------------------------------------- train

std::vector<std::uint64_t> model_seeds(const PipelineConfig& cfg) {
  if (!cfg.model.seeds.empty()) return cfg.model.seeds;
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < cfg.model.runs; ++r)
    seeds.push_back(derive_seed(cfg.seed, {kModelTag, static_cast<std::uint64_t>(r)}));
  return seeds;
}

namespace {

std::vector<MlpConfig> grid(const ModelSection& m, std::uint64_t seed) {
  std::vector<MlpConfig> out;
  for (const auto& hidden : m.hidden)
    for (double lr : m.learning_rate)
      for (int batch : m.batch_size) {
        MlpConfig c;
        c.hidden = hidden;
        c.learning_rate = lr;
        c.batch_size = batch;
        c.max_epochs = m.max_epochs;
        c.patience = m.patience;
        c.optimizer = m.optimizer;
        c.seed = seed;
        out.push_back(c);
      }
  return out;
}

Eigen::VectorXd label_vector(const Dataset& d, std::span<const std::size_t> rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = d.records[rows[i]].label;
  return y;
}

std::string cell_key(Variant v, const std::string& featurizer, const std::string& source) {
  if (v == Variant::Structured) return "structured";
  return std::string(variant_name(v)) + "__" + featurizer + "__" + source;
}

}  // namespace

TrainedCell train_cell(const PipelineConfig& cfg, const Prepared& prep, Variant variant, const std::string& featurizer,
                       const std::string& text_source, std::ostream* log) {
  TrainedCell cell;
  cell.variant = variant;
  cell.featurizer = variant == Variant::Structured ? "" : featurizer;
  cell.text_source = variant == Variant::Structured ? "" : text_source;
  cell.key = cell_key(variant, featurizer, text_source);

  std::vector<FeatureBlock> texts;
  if (variant != Variant::Structured) {
    const auto it = prep.blocks.find(block_key(featurizer, text_source));
    if (it == prep.blocks.end()) fail(Errc::ConfigInvalid, "no features for " + block_key(featurizer, text_source));
    texts.push_back(it->second);
  }
  cell.design = assemble(variant, &prep.structured, texts);
  const EncodedMatrix xtr = select_rows(cell.design, prep.split.train);
  const EncodedMatrix xva = select_rows(cell.design, prep.split.val);
  const EncodedMatrix xte = select_rows(cell.design, prep.split.test);
  const Eigen::VectorXd ytr = label_vector(prep.dataset, prep.split.train);
  const Eigen::VectorXd yva = label_vector(prep.dataset, prep.split.val);
  std::vector<int> yte;
  for (std::size_t i : prep.split.test) yte.push_back(prep.dataset.records[i].label);

  for (std::uint64_t seed : model_seeds(cfg)) {
    GridResult g = grid_search(grid(cfg.model, seed), xtr, ytr, xva, yva, cfg.workers);
    const Eigen::VectorXd p = predict_proba(g.best_model, xte);
    cell.runs.push_back(ScoredSet::from(std::vector<double>(p.data(), p.data() + p.size()), yte, xte.ids));
    cell.chosen.push_back(g.best_config);
    cell.models.push_back(std::move(g.best_model));
    if (g.best_index < g.reports.size() && g.reports[g.best_index]) cell.reports.push_back(*g.reports[g.best_index]);
  }
  say(log, "train: " + cell.key + " (" + std::to_string(cell.design.cols()) + " inputs, " +
               std::to_string(cell.runs.size()) + " runs)");
  return cell;
}

std::vector<TrainedCell> train_all(const PipelineConfig& cfg, const Prepared& prep, std::optional<Variant> only_variant,
                                   std::optional<std::string> only_source, std::ostream* log) {
  std::vector<TrainedCell> cells;
  const auto wanted = [&](Variant v) { return !only_variant || *only_variant == v; };
  if (wanted(Variant::Structured)) cells.push_back(train_cell(cfg, prep, Variant::Structured, "", "", log));
  for (const auto& f : cfg.featurizers)
    for (const auto& source : cfg.text_sources) {
      if (only_source && *only_source != source) continue;
      for (Variant v : {Variant::Text, Variant::Combined})
        if (wanted(v)) cells.push_back(train_cell(cfg, prep, v, f.name, source, log));
    }
  return cells;
}

// ------------------------------------------------------------------ reports

namespace {

const TrainedCell* find_cell(const std::vector<TrainedCell>& cells, Variant v, const std::string& featurizer,
                             const std::string& source) {
  const std::string key = cell_key(v, featurizer, source);
  for (const auto& c : cells)
    if (c.key == key) return &c;
  return nullptr;
}

OJson estimate_json(const MetricEstimate& e) {
  OJson j;
  j["mean"] = e.mean;
  j["ci_low"] = e.ci_low;
  j["ci_high"] = e.ci_high;
  j["n_estimates"] = e.n_estimates;
  j["skipped_resamples"] = e.skipped_resamples;
  return j;
}

}  // namespace

std::string evaluation_report(const PipelineConfig& cfg, const std::vector<TrainedCell>& cells,
                              std::optional<Variant> only_variant, std::optional<std::string> only_source) {
  BootstrapOptions bo;
  bo.n_resamples = cfg.resamples;
  bo.master_seed = bootstrap_seed(cfg);
  bo.workers = cfg.workers;

  OJson errors = OJson::array();
  std::map<std::string, OJson> cache;  // cell key -> metrics object
  const auto cell_json = [&](const TrainedCell* cell) -> OJson {
    if (cell == nullptr) return nullptr;
    if (auto it = cache.find(cell->key); it != cache.end()) return it->second;
    OJson metrics;
    for (const auto& name : cfg.metrics) {
      try {
        metrics[name] = estimate_json(bootstrap(metric_by_name(name), cell->runs, bo));
      } catch (const Error& e) {
        metrics[name] = nullptr;
        errors.push_back(cell->key + "/" + name + ": " + e.what());
      }
    }
    cache[cell->key] = metrics;
    return metrics;
  };

  OJson report;
  report["metrics"] = cfg.metrics;
  report["bootstrap"] = {{"runs", model_seeds(cfg).size()}, {"resamples", cfg.resamples}, {"master_seed", bo.master_seed}};
  report["columns"] = {"structured", "text", "combined"};
  OJson rows = OJson::array();
  for (const auto& f : cfg.featurizers)
    for (const auto& source : cfg.text_sources) {
      if (only_source && *only_source != source) continue;
      OJson row;
      row["featurizer"] = f.name;
      row["text_source"] = source;
      for (Variant v : {Variant::Structured, Variant::Text, Variant::Combined}) {
        const bool wanted = !only_variant || *only_variant == v;
        row[std::string(variant_name(v))] = wanted ? cell_json(find_cell(cells, v, f.name, source)) : OJson(nullptr);
      }
      rows.push_back(std::move(row));
    }
  report["rows"] = std::move(rows);
  report["errors"] = std::move(errors);
  return report.dump(2) + "\n";
}

std::string topk_report(const PipelineConfig& cfg, const std::vector<TrainedCell>& cells, std::optional<int> k) {
  OJson out;
  OJson rows = OJson::array();
  for (const auto& cell : cells) {
    if (cell.runs.empty()) continue;
    const Eigen::Index n = cell.runs.front().scores.size();
    std::vector<Eigen::Index> ks;
    if (k)
      ks.push_back(*k);
    else
      ks = scale_topk(cfg.topk_reference, cfg.topk_reference_n, n);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      double recall = 0, precision = 0, f1 = 0;
      for (const auto& run : cell.runs) {
        const TopKMetrics t = topk_metrics(run, ks[i]);
        recall += t.recall;
        precision += t.precision;
        f1 += t.f1;
      }
      const double r = static_cast<double>(cell.runs.size());
      OJson row;
      row["cell"] = cell.key;
      row["variant"] = variant_name(cell.variant);
      row["featurizer"] = cell.featurizer.empty() ? OJson(nullptr) : OJson(cell.featurizer);
      row["text_source"] = cell.text_source.empty() ? OJson(nullptr) : OJson(cell.text_source);
      row["reference_k"] = k ? OJson(nullptr) : OJson(cfg.topk_reference[i]);
      row["k"] = ks[i];
      row["n"] = n;
      row["recall"] = recall / r;
      row["precision"] = precision / r;
      row["f1"] = f1 / r;
      rows.push_back(std::move(row));
    }
  }
  out["reference_n"] = cfg.topk_reference_n;
  out["rows"] = std::move(rows);
  return out.dump(2) + "\n";
}

// -------------------------------------------------------------- subcommands

namespace {

struct Manifest {
  OJson outputs = OJson::array();
  void add(const fs::path& p) { outputs.push_back(p.filename().string()); }
};

void write_manifest(const PipelineConfig& cfg, const std::string& subcommand, const Manifest& m) {
  OJson j;
  j["tool"] = "credtext";
  j["version"] = kVersion;
  j["subcommand"] = subcommand;
  j["config_sha256"] = cfg.source_hash;
  j["seeds"] = {{"master", cfg.seed},
                {"split", split_seed(cfg)},
                {"models", model_seeds(cfg)},
                {"bootstrap", bootstrap_seed(cfg)}};
  j["workers"] = cfg.workers;
  j["outputs"] = m.outputs;
  write_file(cfg.output_dir / ("manifest-" + subcommand + ".json"), j.dump(2) + "\n");
}

std::string split_json(const Prepared& p) {
  OJson j;
  const auto ids_of = [&](const std::vector<std::size_t>& rows) {
    OJson a = OJson::array();
    for (std::size_t i : rows) a.push_back(p.dataset.records[i].id);
    return a;
  };
  j["seed"] = p.split.seed;
  j["train"] = ids_of(p.split.train);
  j["val"] = ids_of(p.split.val);
  j["test"] = ids_of(p.split.test);
  return j.dump(2) + "\n";
}

void save_matrix(const fs::path& path, const std::vector<std::string>& ids, const Eigen::MatrixXd& values,
                 const std::string& source) {
  FeatureBlock b;
  b.source = source;
  b.ids = ids;
  b.values = values;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  save_doc_vectors(path, b);
}

int cmd_synth(const PipelineConfig& cfg, std::ostream* log, Manifest& m) {
  const SynthOutput out = generate(synth_config(cfg));
  const fs::path dir = cfg.output_dir;
  save_synth(dir, out);
  m.add(dir / "dataset.jsonl");
  m.add(dir / "schema.json");
  m.add(dir / "truth.json");
  if (cfg.synth.word_vector_dim > 0) {
    write_word_vectors(dir / "word_vectors.txt", out, cfg.synth.word_vector_dim, cfg.seed);
    m.add(dir / "word_vectors.txt");
  }
  if (cfg.synth.doc_vector_dim > 0) {
    write_doc_vectors(dir / "doc_vectors.tsv", out, cfg.synth.doc_vector_dim, cfg.seed);
    m.add(dir / "doc_vectors.tsv");
  }
  std::size_t positives = 0;
  for (const auto& r : out.dataset.records) positives += static_cast<std::size_t>(r.label);
  say(log, "synth: " + std::to_string(out.dataset.size()) + " records, " + std::to_string(positives) + " defaulters");
  return 0;
}

int cmd_refine(const PipelineConfig& cfg, std::ostream* log, Manifest& m) {
  Dataset data = load_or_generate(cfg);
  LlmClient client(cfg.endpoint, std::make_shared<SystemClock>(), [log](const std::string& line) { say(log, line); });
  const RefineSummary s =
      refine_dataset(data, cfg.cache_dir, client, cfg.workers, [log](const std::string& w) { say(log, "warning: " + w); });
  save_dataset(cfg.output_dir / "dataset.jsonl", data);
  save_schema(cfg.output_dir / "schema.json", data.schema);
  m.add("dataset.jsonl");
  m.add("schema.json");
  OJson j;
  j["refined"] = s.refined;
  j["from_cache"] = s.from_cache;
  j["network_requests"] = client.requests_sent();
  j["retries"] = client.retries();
  j["format_mismatches"] = s.format_mismatches;
  write_file(cfg.output_dir / "refine_summary.json", j.dump(2) + "\n");
  m.add("refine_summary.json");
  say(log, "refine: " + std::to_string(s.refined) + " refined, " + std::to_string(s.format_mismatches.size()) +
               " unparsed");
  return 0;
}

int cmd_featurize(const PipelineConfig& cfg, std::ostream* log, Manifest& m) {
  const Prepared p = prepare(cfg, log);
  write_file(cfg.output_dir / "split.json", split_json(p));
  m.add("split.json");
  write_file(cfg.output_dir / "woe.json", woe_table_to_json(p.woe));
  m.add("woe.json");
  save_matrix(cfg.output_dir / "features" / "structured.tsv", p.structured.ids, p.structured.values, "structured");
  m.add("structured.tsv");
  for (const auto& [key, block] : p.blocks) {
    save_matrix(cfg.output_dir / "features" / (key + ".tsv"), block.ids, block.values, block.source);
    m.add(key + ".tsv");
  }
  return 0;
}

int cmd_train(const PipelineConfig& cfg, const Overrides& o, std::ostream* log, Manifest& m) {
  const Prepared p = prepare(cfg, log);
  const auto cells = train_all(cfg, p, o.variant, o.text_source, log);
  OJson summary = OJson::array();
  for (const auto& c : cells) {
    for (std::size_t r = 0; r < c.models.size(); ++r) {
      const std::string stem = c.key + "_run" + std::to_string(r);
      write_file(cfg.output_dir / "models" / (stem + ".json"), model_to_json(c.models[r]));
      m.add(stem + ".json");
      if (r < c.reports.size()) {
        write_file(cfg.output_dir / "models" / (stem + "_curve.csv"), train_curve_csv(c.reports[r]));
        m.add(stem + "_curve.csv");
      }
      OJson s;
      s["cell"] = c.key;
      s["run"] = r;
      s["hidden"] = c.chosen[r].hidden;
      s["learning_rate"] = c.chosen[r].learning_rate;
      s["batch_size"] = c.chosen[r].batch_size;
      s["best_epoch"] = r < c.reports.size() ? OJson(c.reports[r].best_epoch) : OJson(nullptr);
      s["val_loss"] = r < c.reports.size() ? OJson(c.reports[r].final_val_loss) : OJson(nullptr);
      summary.push_back(std::move(s));
    }
  }
  write_file(cfg.output_dir / "train_summary.json", summary.dump(2) + "\n");
  m.add("train_summary.json");
  return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, const Overrides& o, std::ostream* log, Manifest& m) {
  const Prepared p = prepare(cfg, log);
  const auto cells = train_all(cfg, p, o.variant, o.text_source, log);
  say(log, "evaluate: bootstrapping " + std::to_string(cells.size()) + " cells");
  write_file(cfg.output_dir / "report.json", evaluation_report(cfg, cells, o.variant, o.text_source));
  m.add("report.json");
  write_file(cfg.output_dir / "topk.json", topk_report(cfg, cells, o.k));
  m.add("topk.json");
  for (const auto& c : cells) {
    try {
      write_file(cfg.output_dir / "curves" / ("roc_" + c.key + ".csv"), points_csv(roc_points(c.runs.front()), "fpr", "tpr"));
      write_file(cfg.output_dir / "curves" / ("pr_" + c.key + ".csv"),
                 points_csv(pr_points(c.runs.front()), "recall", "precision"));
      m.add("roc_" + c.key + ".csv");
      m.add("pr_" + c.key + ".csv");
    } catch (const Error& e) {
      say(log, std::string("warning: no curves for ") + c.key + ": " + e.what());
    }
  }
  return 0;
}

std::pair<std::string, std::string> focus(const PipelineConfig& cfg, const Overrides& o) {
  const std::string source = o.text_source.value_or(cfg.text_sources.front());
  return {cfg.featurizers.front().name, source};
}

ScoredSet mean_scores(const TrainedCell& cell) {
  ScoredSet s = cell.runs.front();
  for (std::size_t r = 1; r < cell.runs.size(); ++r) s.scores += cell.runs[r].scores;
  s.scores /= static_cast<double>(cell.runs.size());
  return s;
}

int cmd_explain(const PipelineConfig& cfg, const Overrides& o, std::ostream* log, Manifest& m) {
  const Prepared p = prepare(cfg, log);
  const auto [feat_name, source] = focus(cfg, o);
  const TextFeaturizer* feat = nullptr;
  std::size_t fi = 0;
  // featurizers are stored source-major
  for (const auto& s : cfg.text_sources)
    for (const auto& sec : cfg.featurizers) {
      if (sec.name == feat_name && s == source) feat = &p.featurizers[fi];
      ++fi;
    }
  if (feat == nullptr || !feat->can_embed())
    fail(Errc::ConfigInvalid, "featurizers[0]: explain needs a featurizer that can embed perturbed text");

  const TrainedCell structured = train_cell(cfg, p, Variant::Structured, "", "", log);
  const TrainedCell combined = train_cell(cfg, p, Variant::Combined, feat_name, source, log);
  const ScoredSet sp = mean_scores(structured);
  const ScoredSet cp = mean_scores(combined);
  std::vector<int> labels(static_cast<std::size_t>(sp.labels.size()));
  for (Eigen::Index i = 0; i < sp.labels.size(); ++i) labels[static_cast<std::size_t>(i)] = sp.labels(i);
  const CaseSelection sel = select_uncertain_cases(
      sp.ids, std::span<const double>(sp.scores.data(), static_cast<std::size_t>(sp.scores.size())),
      std::span<const double>(cp.scores.data(), static_cast<std::size_t>(cp.scores.size())), labels,
      cfg.explain.band_lo, cfg.explain.band_hi, cfg.explain.cases);
  say(log, "explain: " + std::to_string(sel.ids.size()) + " cases selected");

  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < p.dataset.size(); ++i) row_of[p.dataset.records[i].id] = i;
  const Eigen::Index s_cols = p.structured.cols();
  const Granularity gran = cfg.explain.granularity == "word" ? Granularity::Word : Granularity::Phrase;

  std::vector<std::vector<Attribution>> per_case;
  OJson cases = OJson::array();
  for (std::size_t c = 0; c < sel.ids.size(); ++c) {
    const std::size_t row = row_of.at(sel.ids[c]);
    const Eigen::RowVectorXd srow = p.structured.values.row(static_cast<Eigen::Index>(row));
    const ScoreFn score = [&, row, srow](const std::string& text) {
      const Eigen::VectorXd t = feat->embed(cfg.tokenizer(text), row);
      Eigen::MatrixXd x(1, s_cols + t.size());
      x.row(0).head(s_cols) = srow;
      x.row(0).tail(t.size()) = t.transpose();
      double sum = 0.0;
      for (const auto& model : combined.models) sum += predict_proba(model, x)(0);
      return sum / static_cast<double>(combined.models.size());
    };
    LimeOptions lo;
    lo.n_samples = cfg.explain.samples;
    lo.ridge = cfg.explain.ridge;
    lo.top_k = cfg.explain.top_k;
    lo.seed = derive_seed(cfg.seed, {kLimeTag, row});
    const std::string* text = select_text(p.dataset.records[row], source);
    auto attributions = lime_explain(score, *text, gran, cfg.tokenizer, lo);
    OJson cj;
    cj["id"] = sel.ids[c];
    cj["structured_prob"] = sel.structured_prob[c];
    cj["combined_prob"] = sel.combined_prob[c];
    cj["improvement"] = sel.improvement[c];
    OJson units = OJson::array();
    for (const auto& a : attributions) units.push_back({{"unit", a.unit}, {"weight", a.weight}, {"position", a.position}});
    cj["units"] = std::move(units);
    cases.push_back(std::move(cj));
    per_case.push_back(std::move(attributions));
  }
  write_file(cfg.output_dir / "explain_cases.json", cases.dump(2) + "\n");
  m.add("explain_cases.json");
  write_file(cfg.output_dir / "explain_importance.csv", attribution_csv(aggregate_importance(per_case, cfg.explain.top_units)));
  m.add("explain_importance.csv");
  return 0;
}

int cmd_profit(const PipelineConfig& cfg, const Overrides& o, std::ostream* log, Manifest& m) {
  const Prepared p = prepare(cfg, log);
  const auto [feat_name, source] = focus(cfg, o);
  const TrainedCell structured = train_cell(cfg, p, Variant::Structured, "", "", log);
  const TrainedCell combined = train_cell(cfg, p, Variant::Combined, feat_name, source, log);
  const auto econ = economics_of(p.dataset);
  const ProfitCurve a = profit_curve(mean_scores(combined), econ, cfg.econ);
  const ProfitCurve b = profit_curve(mean_scores(structured), econ, cfg.econ);
  const auto diff = profit_difference(a, b);
  write_file(cfg.output_dir / "profit_structured.csv", profit_curve_csv(b));
  write_file(cfg.output_dir / "profit_combined.csv", profit_curve_csv(a));
  write_file(cfg.output_dir / "profit_difference.csv", profit_difference_csv(diff));
  m.add("profit_structured.csv");
  m.add("profit_combined.csv");
  m.add("profit_difference.csv");
  const auto max_json = [](const ProfitMax& pm) {
    OJson j;
    j["rejected"] = pm.rejected;
    j["threshold"] = std::isinf(pm.threshold) ? OJson("inf") : OJson(pm.threshold);
    j["profit"] = pm.profit;
    return j;
  };
  OJson j;
  j["lgd"] = cfg.econ.lgd;
  j["combined"] = {{"cell", combined.key}, {"max", max_json(profit_max_threshold(a))}, {"accept_all", a.points.front().profit}};
  j["structured"] = {{"cell", structured.key}, {"max", max_json(profit_max_threshold(b))}, {"accept_all", b.points.front().profit}};
  const auto best = std::max_element(diff.begin(), diff.end());
  j["max_difference"] = {{"rejected", best - diff.begin()}, {"value", *best}};
  write_file(cfg.output_dir / "profit.json", j.dump(2) + "\n");
  m.add("profit.json");
  return 0;
}

int cmd_compare(const PipelineConfig& cfg, const Overrides& o, std::ostream* log, Manifest& m) {
  const Dataset data = load_or_generate(cfg);
  const std::string refined = o.text_source.value_or("full");
  if (refined == "human") fail(Errc::ConfigInvalid, "--text-source: compare needs a refined text source");
  std::vector<TokenList> human, other;
  std::vector<double> len_h, len_r;
  for (const auto& rec : data.records) {
    const std::string* t = select_text(rec, refined);
    if (t == nullptr) fail(Errc::MissingText, "record " + rec.id + " has no '" + refined + "' text");
    human.push_back(cfg.tokenizer(rec.human_text));
    other.push_back(cfg.tokenizer(*t));
    len_h.push_back(static_cast<double>(human.back().size()));
    len_r.push_back(static_cast<double>(other.back().size()));
  }
  OJson j;
  j["records"] = data.size();
  j["refined_source"] = refined;
  const MannWhitneyResult mw = mann_whitney_u(len_h, len_r);
  j["length"] = {{"human_mean", std::accumulate(len_h.begin(), len_h.end(), 0.0) / static_cast<double>(len_h.size())},
                 {"refined_mean", std::accumulate(len_r.begin(), len_r.end(), 0.0) / static_cast<double>(len_r.size())},
                 {"mann_whitney_u", mw.u},
                 {"p_two_sided", mw.p_two_sided},
                 {"exact", mw.exact}};

  // TF-IDF cosine between each human text and its refined counterpart.
  std::vector<TokenList> both = human;
  both.insert(both.end(), other.begin(), other.end());
  const TfidfModel tfidf = fit_tfidf(both);
  std::vector<double> cosines;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < human.size(); ++i) {
    try {
      cosines.push_back(cosine_similarity(transform(tfidf, human[i]), transform(tfidf, other[i])));
    } catch (const Error&) {
      ++skipped;
    }
  }
  double mean = 0.0;
  for (double c : cosines) mean += c;
  mean = cosines.empty() ? 0.0 : mean / static_cast<double>(cosines.size());
  j["tfidf_cosine"] = {{"mean", mean}, {"pairs", cosines.size()}, {"skipped", skipped}};

  if (!cfg.dictionary.empty()) {
    const CategoryDictionary dict = load_dictionary(cfg.dictionary);
    const auto rows = compare_corpora(human, other, dict, cfg.comparison_tests);
    write_file(cfg.output_dir / "compare_categories.csv", comparison_csv(rows));
    m.add("compare_categories.csv");
    const int tests = cfg.comparison_tests > 0 ? cfg.comparison_tests : static_cast<int>(dict.categories.size());
    j["bonferroni_tests"] = tests;
    OJson cats = OJson::array();
    for (const auto& r : rows) {
      OJson c;
      c["category"] = r.category;
      c["f_human"] = r.f1;
      c["f_refined"] = r.f2;
      c["t"] = std::isfinite(r.t) ? OJson(r.t) : OJson(r.t > 0 ? "inf" : "-inf");
      c["significant"] = {{"0.1", r.significant[0]}, {"0.05", r.significant[1]}, {"0.01", r.significant[2]}};
      cats.push_back(std::move(c));
    }
    j["categories"] = std::move(cats);
  } else {
    j["categories"] = nullptr;
  }
  write_file(cfg.output_dir / "compare.json", j.dump(2) + "\n");
  m.add("compare.json");
  say(log, "compare: " + std::to_string(data.size()) + " text pairs");
  return 0;
}

}  // namespace

int run_subcommand(const std::string& name, PipelineConfig cfg, const Overrides& overrides, std::ostream* log) {
  apply_overrides(cfg, overrides);
  validate_config(cfg, name);
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) fail(Errc::Io, "cannot create " + cfg.output_dir.string());
  Manifest m;
  int status = 0;
  if (name == "synth")
    status = cmd_synth(cfg, log, m);
  else if (name == "refine")
    status = cmd_refine(cfg, log, m);
  else if (name == "featurize")
    status = cmd_featurize(cfg, log, m);
  else if (name == "train")
    status = cmd_train(cfg, overrides, log, m);
  else if (name == "evaluate")
    status = cmd_evaluate(cfg, overrides, log, m);
  else if (name == "explain")
    status = cmd_explain(cfg, overrides, log, m);
  else if (name == "profit")
    status = cmd_profit(cfg, overrides, log, m);
  else if (name == "compare")
    status = cmd_compare(cfg, overrides, log, m);
  else
    fail(Errc::ConfigInvalid, "unknown subcommand '" + name + "'");
  write_manifest(cfg, name, m);
  return status;
}

}  // namespace credtext
