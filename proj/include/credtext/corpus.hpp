#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "credtext/tokenize.hpp"

namespace credtext {

struct Missing {
  bool operator==(const Missing&) const = default;
};

/// A structured feature cell: missing, continuous, or categorical.
using FeatureValue = std::variant<Missing, double, std::string>;

inline bool is_missing(const FeatureValue& v) { return std::holds_alternative<Missing>(v); }

enum class FeatureKind { Continuous, Categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
};

using Schema = std::vector<FeatureSpec>;

/// Refined-text variant tags accepted in dataset files.
inline constexpr const char* kRefinedTags[] = {"full", "positive", "negative", "pos_neg", "neg_pos"};

bool is_refined_tag(const std::string& tag);

struct LoanRecord {
  std::string id;
  std::map<std::string, FeatureValue> features;
  std::string human_text;
  std::map<std::string, std::string> refined_texts;
  int label = 0;  // 1 = defaulter
  double loan_amount = 0.0;
  double interest_rate = 0.0;
  int term_months = 0;
};

struct Dataset {
  std::vector<LoanRecord> records;
  Schema schema;

  std::size_t size() const noexcept { return records.size(); }
  std::vector<int> labels() const;
  std::vector<std::string> ids() const;
};

/// Index sets into Dataset::records, each sorted ascending.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

Schema load_schema(const std::filesystem::path& path);
void save_schema(const std::filesystem::path& path, const Schema& schema);

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Parses one JSON-lines record. `line_no` is only used in error messages.
LoanRecord parse_record(const std::string& line, const Schema& schema, std::size_t line_no);
std::string format_record(const LoanRecord& record, const Schema& schema);

struct SplitOptions {
  double train_frac = 0.7;
  double val_frac_of_train = 0.2;
  std::uint64_t seed = 0;
  bool require_val = true;
};

/// Stratified by label. Test counts are largest-remainder rounded to
/// round(n * (1 - train_frac)); validation is ceil(val_frac * pool), spread
/// across labels by largest remainder with the minority label first on ties.
SplitIndices stratified_split(const Dataset& dataset, const SplitOptions& options);

struct LengthStats {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample sd; 0 for a single observation
};

/// `text_selector` is "human" or a refined-text tag.
std::map<int, LengthStats> text_length_stats(const Dataset& dataset, const std::string& text_selector,
                                             const Tokenizer& tokenizer);

/// Returns the selected text of a record or nullptr if absent.
const std::string* select_text(const LoanRecord& record, const std::string& text_selector);

}  // namespace credtext
