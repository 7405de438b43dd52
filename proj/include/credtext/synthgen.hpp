#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "credtext/corpus.hpp"

namespace credtext {

struct Clause {
  std::string text;
  double contribution = 0.0;  // log-odds of default
};

struct SynthFeature {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  double strength = 0.0;  // log-odds per standard deviation, or scale of level effects
  double mean = 0.0;      // continuous only
  double scale = 1.0;     // continuous only
  std::vector<std::string> levels;        // categorical only
  std::vector<double> level_effects;      // categorical only, multiplied by strength
};

struct SynthConfig {
  std::size_t n = 2460;
  double default_rate = 60.0 / 2460.0;
  std::uint64_t seed = 1;
  double missing_rate = 0.02;
  std::vector<SynthFeature> features;
  std::vector<Clause> risky_clauses;
  std::vector<Clause> safe_clauses;
  std::vector<Clause> neutral_clauses;
  int clauses_min = 3;
  int clauses_max = 6;
  double amount_min = 50000.0;
  double amount_max = 500000.0;
  double rate_min = 0.06;
  double rate_max = 0.18;
  bool refiner = true;
  double calibration_tolerance = 1e-6;

  void validate() const;
};

/// Named configurations: "reference" (n = 2460, 60 defaulters expected),
/// "balanced" (10 %), "acceptance" (n = 2000, 10 %, tabular and text signal),
/// "no_signal" and "text_only".
SynthConfig synth_preset(const std::string& name);

/// Default English clause banks and feature set with the given signal scales.
std::vector<SynthFeature> default_features(double tabular_scale);
std::vector<Clause> default_risky_clauses(double text_scale);
std::vector<Clause> default_safe_clauses(double text_scale);
std::vector<Clause> default_neutral_clauses();

struct RecordTruth {
  std::string id;
  std::map<std::string, double> feature_contributions;
  std::vector<std::size_t> clauses;  // indices into SynthOutput::clause_table
  double log_odds = 0.0;
  double probability = 0.0;
};

struct SynthOutput {
  Dataset dataset;
  double intercept = 0.0;
  std::vector<Clause> clause_table;  // risky, then safe, then neutral
  std::vector<RecordTruth> truth;
};

/// log_odds = intercept + sum of feature contributions (name order) + sum of
/// clause contributions (draw order); probability = 1 / (1 + exp(-log_odds)).
double truth_log_odds(double intercept, const RecordTruth& truth, const std::vector<Clause>& clause_table);

SynthOutput generate(const SynthConfig& cfg);

/// Rule-based two-section answer for a set of drawn clauses.
std::string rule_based_refine(const std::vector<Clause>& drawn);

std::string truth_json(const SynthOutput& out);

/// Writes dataset.jsonl, schema.json and truth.json into `dir`.
void save_synth(const std::filesystem::path& dir, const SynthOutput& out);

/// Word-vector fixture over the clause vocabulary: words that only occur in
/// risky clauses lean along +e0, safe-only words along -e0.
void write_word_vectors(const std::filesystem::path& path, const SynthOutput& out, int dim, std::uint64_t seed);

/// Document-vector fixture: mean of clause vectors plus noise, one line per record.
void write_doc_vectors(const std::filesystem::path& path, const SynthOutput& out, int dim, std::uint64_t seed);

}  // namespace credtext
