#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "credtext/corpus.hpp"

namespace credtext {

/// Dense row-major-by-meaning matrix: one row per record id, named columns.
struct EncodedMatrix {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }
};

/// Bin layout for one feature. Continuous: k strictly increasing edges give
/// k+1 half-open bins [lo, hi). Categorical: level -> bin id; unseen levels
/// map to `unseen_bin()`, which carries no counts.
struct FeatureBinning {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  std::vector<double> edges;
  std::map<std::string, int> levels;

  int bin_count() const noexcept {
    return kind == FeatureKind::Continuous ? static_cast<int>(edges.size()) + 1 : static_cast<int>(levels.size());
  }
  int unseen_bin() const noexcept { return -1; }
  /// Bin of a value, or -1 for an unseen categorical level. Throws on Missing.
  int bin_of(const FeatureValue& value) const;
};

struct BinningSpec {
  std::vector<FeatureBinning> features;  // schema order
};

/// Literal category that replaces missing categorical values.
inline constexpr const char* kMissingCategory = "MISSING";

/// Fills Missing values in every row: continuous with the training mean,
/// categorical with "MISSING".
Dataset impute(const Dataset& dataset, std::span<const std::size_t> train_indices);

/// Quantile binning on training rows (default 5 bins); categorical levels are
/// those observed in training.
BinningSpec fit_binning(const Dataset& dataset, std::span<const std::size_t> train_indices, int quantile_bins = 5);

struct BinStats {
  double good = 0.0;  // label 0
  double bad = 0.0;   // label 1
  double woe = 0.0;
};

struct FeatureWoe {
  FeatureBinning binning;
  std::vector<BinStats> bins;
  double total_good = 0.0;
  double total_bad = 0.0;
  double smoothing = 0.0;
  double iv = 0.0;
};

struct WoeTable {
  std::vector<FeatureWoe> features;  // schema order

  const FeatureWoe* find(const std::string& name) const;
};

/// WoE of one bin from raw counts using additive smoothing across `n_bins`.
double woe_value(double good, double bad, double total_good, double total_bad, double smoothing, int n_bins);

/// Information value from per-bin counts, with the same smoothed proportions.
double iv_from_counts(std::span<const double> good, std::span<const double> bad, double smoothing);

WoeTable fit_woe(const Dataset& dataset, std::span<const std::size_t> train_indices, const BinningSpec& binning,
                 double smoothing = 0.5);

double information_value(const WoeTable& table, const std::string& feature);

/// Features with lo < IV < hi, in schema order.
std::vector<std::string> select_by_iv(const WoeTable& table, double lo = 0.01, double hi = 0.50);

/// VIF of every column of `x` against the others plus an intercept.
/// Exact collinearity yields +inf.
Eigen::VectorXd variance_inflation(const Eigen::MatrixXd& x);

/// Iteratively drops the column with the largest VIF while it exceeds
/// `threshold`. Survivors are returned in original order.
std::vector<std::string> vif_filter(const EncodedMatrix& matrix, double threshold = 10.0);

/// Each cell is the WoE of the row's bin; unseen categorical levels encode as 0.
EncodedMatrix encode(const Dataset& dataset, const WoeTable& table, const std::vector<std::string>& selected);

/// Column subset by name, in the order given.
EncodedMatrix select_columns(const EncodedMatrix& matrix, const std::vector<std::string>& columns);
EncodedMatrix select_rows(const EncodedMatrix& matrix, std::span<const std::size_t> rows);

std::string woe_table_to_json(const WoeTable& table);

}  // namespace credtext
