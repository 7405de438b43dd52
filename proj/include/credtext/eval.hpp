#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace credtext {

/// Scores with labels (1 = defaulter, scored high) and record ids.
struct ScoredSet {
  std::vector<std::string> ids;
  Eigen::VectorXd scores;
  Eigen::VectorXi labels;

  Eigen::Index size() const noexcept { return scores.size(); }
  Eigen::Index positives() const noexcept { return labels.sum(); }

  static ScoredSet from(std::vector<double> scores, std::vector<int> labels, std::vector<std::string> ids = {});
  ScoredSet subset(std::span<const Eigen::Index> rows) const;
};

/// Concordant plus half-tied positive/negative pairs over all pairs.
double auc(const ScoredSet& s);

/// Largest |TPR - FPR| over all thresholds.
double ks(const ScoredSet& s);

struct HMeasureOptions {
  /// Cost of missing a defaulter relative to wrongly rejecting a good
  /// borrower. Unset: the inverse relative class frequency pi0 / pi1.
  std::optional<double> severity_ratio;
  /// Use the original Beta(2, 2) cost weighting instead.
  bool beta22 = false;
};

/// Beta parameters of the cost-weight density for a given set.
std::pair<double, double> h_measure_beta(const ScoredSet& s, const HMeasureOptions& options = {});

/// Hand's H: 1 - L / L_ref, where L integrates the minimum expected
/// misclassification loss over the ROC convex hull against a Beta cost
/// density and L_ref is the same for the trivial classifier.
double h_measure(const ScoredSet& s, const HMeasureOptions& options = {});

/// Average precision with tied scores entering together.
double pr_auc(const ScoredSet& s);

struct TopKMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

/// The k highest scores are predicted positive; ties break by record id.
TopKMetrics topk_metrics(const ScoredSet& s, Eigen::Index k);

/// Rescales reference rejection counts (70, 100, ... for 738 test loans) to
/// a test set of `n`, rounding and clamping into [1, n].
std::vector<Eigen::Index> scale_topk(std::span<const int> reference_k, Eigen::Index reference_n, Eigen::Index n);

/// One point per distinct threshold, scanning scores high to low.
std::vector<std::pair<double, double>> roc_points(const ScoredSet& s);  // (FPR, TPR)
std::vector<std::pair<double, double>> pr_points(const ScoredSet& s);   // (recall, precision)

struct Metric {
  std::string name;
  std::function<double(const ScoredSet&)> fn;
};

/// "auc", "ks", "h", "prauc".
Metric metric_by_name(const std::string& name);

struct MetricEstimate {
  std::string metric;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_estimates = 0;
  std::size_t skipped_resamples = 0;
};

struct BootstrapOptions {
  int n_resamples = 1000;
  std::uint64_t master_seed = 0;
  int workers = 1;
  int max_redraws = 100;
};

/// Resampled estimates over every (run, resample) pair. Resample indices come
/// from a seed derived from (master_seed, run, resample, attempt), so the
/// result does not depend on the worker count.
std::vector<double> bootstrap_values(const Metric& metric, std::span<const ScoredSet> runs,
                                     const BootstrapOptions& options, std::size_t* skipped = nullptr);

MetricEstimate bootstrap(const Metric& metric, std::span<const ScoredSet> runs, const BootstrapOptions& options);

/// Linear-interpolated percentile of sorted values, q in [0, 1].
double percentile(std::span<const double> sorted, double q);

std::string metric_estimate_json(const MetricEstimate& e);
std::string points_csv(const std::vector<std::pair<double, double>>& points, const std::string& x_name,
                       const std::string& y_name);

}  // namespace credtext
