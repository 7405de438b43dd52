#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "credtext/tokenize.hpp"

namespace credtext {

enum class Granularity { Word, Phrase };

/// Removable units of a text and how to put a subset back together.
/// Word mode: units are tokens, kept units joined by one space.
/// Phrase mode: units are the runs between punctuation marks; each keeps the
/// delimiter text that followed it, so the full mask returns the original.
class Segmentation {
 public:
  static Segmentation build(std::string_view text, Granularity granularity, const Tokenizer& tokenizer);

  Granularity granularity() const noexcept { return granularity_; }
  const std::vector<std::string>& units() const noexcept { return units_; }
  std::size_t size() const noexcept { return units_.size(); }

  /// `mask[i]` true keeps unit i.
  std::string reconstruct(const std::vector<bool>& mask) const;

 private:
  Granularity granularity_ = Granularity::Word;
  std::vector<std::string> units_;
  std::string prefix_;                 // phrase mode: delimiters before the first unit
  std::vector<std::string> raw_;       // phrase mode: unit as written, with surrounding space
  std::vector<std::string> trailing_;  // phrase mode: delimiter run after each unit
};

Segmentation segment(std::string_view text, Granularity granularity, const Tokenizer& tokenizer);

struct Attribution {
  std::string unit;
  double weight = 0.0;  // > 0: presence raises the predicted default probability
  std::size_t support = 0;
  std::size_t position = 0;  // index of the unit in its segmentation
};

using ScoreFn = std::function<double(const std::string&)>;

struct LimeOptions {
  int n_samples = 1000;
  std::optional<double> kernel_width;  // default 0.75 * sqrt(m)
  double ridge = 1.0;
  int top_k = 15;  // <= 0 keeps every unit
  std::uint64_t seed = 0;
};

struct LimeDesign {
  Eigen::MatrixXd masks;    // n_samples x m, row 0 all ones
  Eigen::VectorXd scores;   // score of each reconstruction
  Eigen::VectorXd weights;  // proximity kernel
};

/// Perturbation sample: removal count uniform on 1..m, removed units uniform
/// without replacement. A unit's fate is keyed on its text and occurrence, so
/// reordering units reorders the mask columns and nothing else.
LimeDesign lime_sample(const ScoreFn& score_fn, const Segmentation& seg, const LimeOptions& options);

/// Weighted ridge fit (unpenalised intercept) of scores on mask bits.
Eigen::VectorXd lime_coefficients(const LimeDesign& design, double ridge);

/// All units' attributions ranked by |weight|, truncated to top_k.
std::vector<Attribution> lime_explain(const ScoreFn& score_fn, std::string_view text, Granularity granularity,
                                      const Tokenizer& tokenizer, const LimeOptions& options = {});

struct CaseSelection {
  std::vector<std::string> ids;
  std::vector<double> structured_prob;
  std::vector<double> combined_prob;
  std::vector<double> improvement;
  std::vector<std::size_t> rows;  // positions in the input arrays
};

/// Cases whose structured-model probability lies in `band` (inclusive) and
/// whose combined model moved closer to the label, ranked by the reduction in
/// absolute error.
CaseSelection select_uncertain_cases(const std::vector<std::string>& ids, std::span<const double> structured_probs,
                                     std::span<const double> combined_probs, std::span<const int> labels,
                                     double band_lo = 0.40, double band_hi = 0.60, std::size_t top_n = 250);

struct AggregatedUnit {
  std::string unit;
  double mean_weight = 0.0;
  std::size_t case_count = 0;
};

/// Mean signed weight per unit text across cases, ranked by |mean|.
std::vector<AggregatedUnit> aggregate_importance(const std::vector<std::vector<Attribution>>& per_case,
                                                 std::size_t top = 15);

std::string attribution_csv(const std::vector<AggregatedUnit>& ranked);

}  // namespace credtext
