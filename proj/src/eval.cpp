#include "credtext/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include <boost/math/special_functions/beta.hpp>
#include <json.hpp>

#include "credtext/error.hpp"
#include "credtext/rng.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("eval", code, detail); }

void require_both_classes(const ScoredSet& s) {
  const auto pos = s.positives();
  if (pos == 0 || pos == s.size()) fail(Errc::SingleClass, "both labels are required");
}

/// Tie groups in descending score order: (positives, negatives) per group.
std::vector<std::pair<Eigen::Index, Eigen::Index>> descending_groups(const ScoredSet& s) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(s.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return s.scores(a) > s.scores(b); });
  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;
  for (std::size_t i = 0; i < order.size();) {
    const double v = s.scores(order[i]);
    Eigen::Index p = 0, q = 0;
    for (; i < order.size() && s.scores(order[i]) == v; ++i) (s.labels(order[i]) == 1 ? p : q) += 1;
    groups.emplace_back(p, q);
  }
  return groups;
}

double cross(const std::pair<double, double>& o, const std::pair<double, double>& a,
             const std::pair<double, double>& b) {
  return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
}

/// Upper convex hull of ROC points, from (0,0) to (1,1).
std::vector<std::pair<double, double>> roc_hull(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> hull;
  for (const auto& p : pts) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) >= 0.0) hull.pop_back();
    hull.push_back(p);
  }
  return hull;
}

/// Integral over c of min_i [c pi0 F_i + (1 - c) pi1 (1 - T_i)] times the
/// Beta(a, b) density, with the minimum taken over hull vertices.
double hull_loss(const std::vector<std::pair<double, double>>& hull, double pi0, double pi1, double a, double b) {
  using boost::math::ibeta;
  const std::size_t m = hull.size();
  // c at which vertex i and i+1 cost the same; decreasing in i on a concave hull
  std::vector<double> cut(m + 1);
  cut[0] = 1.0;
  cut[m] = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double d_f = hull[i + 1].first - hull[i].first;
    const double d_t = hull[i + 1].second - hull[i].second;
    const double denom = pi0 * d_f + pi1 * d_t;
    cut[i + 1] = denom > 0.0 ? pi1 * d_t / denom : 0.0;
  }
  const double mean_c = a / (a + b);
  const double mean_1mc = b / (a + b);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double hi = std::clamp(cut[i], 0.0, 1.0);
    const double lo = std::clamp(cut[i + 1], 0.0, 1.0);
    if (hi <= lo) continue;
    const double int_c = mean_c * (ibeta(a + 1.0, b, hi) - ibeta(a + 1.0, b, lo));
    const double int_1mc = mean_1mc * (ibeta(a, b + 1.0, hi) - ibeta(a, b + 1.0, lo));
    loss += pi0 * hull[i].first * int_c + pi1 * (1.0 - hull[i].second) * int_1mc;
  }
  return loss;
}

}  // namespace

ScoredSet ScoredSet::from(std::vector<double> scores, std::vector<int> labels, std::vector<std::string> ids) {
  if (scores.size() != labels.size()) fail(Errc::RowMismatch, "scores and labels differ in length");
  ScoredSet s;
  s.scores = Eigen::Map<const Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size()));
  s.labels = Eigen::Map<const Eigen::VectorXi>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  if (ids.empty()) {
    char buf[16];
    for (std::size_t i = 0; i < scores.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%08zu", i);
      ids.emplace_back(buf);
    }
  }
  if (ids.size() != scores.size()) fail(Errc::RowMismatch, "ids and scores differ in length");
  s.ids = std::move(ids);
  return s;
}

ScoredSet ScoredSet::subset(std::span<const Eigen::Index> rows) const {
  ScoredSet out;
  out.scores.resize(static_cast<Eigen::Index>(rows.size()));
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  out.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.scores(static_cast<Eigen::Index>(i)) = scores(rows[i]);
    out.labels(static_cast<Eigen::Index>(i)) = labels(rows[i]);
    out.ids.push_back(ids[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

double auc(const ScoredSet& s) {
  require_both_classes(s);
  const double n1 = static_cast<double>(s.positives());
  const double n0 = static_cast<double>(s.size()) - n1;
  // scan high to low: positives in a group beat every negative still below
  double negatives_below = n0;
  double concordant = 0.0, ties = 0.0;
  for (const auto& [p, q] : descending_groups(s)) {
    negatives_below -= static_cast<double>(q);
    concordant += static_cast<double>(p) * negatives_below;
    ties += static_cast<double>(p) * static_cast<double>(q);
  }
  return (concordant + 0.5 * ties) / (n1 * n0);
}

std::vector<std::pair<double, double>> roc_points(const ScoredSet& s) {
  require_both_classes(s);
  const double n1 = static_cast<double>(s.positives());
  const double n0 = static_cast<double>(s.size()) - n1;
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  Eigen::Index tp = 0, fp = 0;
  for (const auto& [p, q] : descending_groups(s)) {
    tp += p;
    fp += q;
    pts.emplace_back(static_cast<double>(fp) / n0, static_cast<double>(tp) / n1);
  }
  return pts;
}

std::vector<std::pair<double, double>> pr_points(const ScoredSet& s) {
  require_both_classes(s);
  const double n1 = static_cast<double>(s.positives());
  std::vector<std::pair<double, double>> pts;
  Eigen::Index tp = 0, fp = 0;
  for (const auto& [p, q] : descending_groups(s)) {
    tp += p;
    fp += q;
    pts.emplace_back(static_cast<double>(tp) / n1, static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return pts;
}

double ks(const ScoredSet& s) {
  double best = 0.0;
  for (const auto& [fpr, tpr] : roc_points(s)) best = std::max(best, std::abs(tpr - fpr));
  return best;
}

std::pair<double, double> h_measure_beta(const ScoredSet& s, const HMeasureOptions& options) {
  if (options.beta22) return {2.0, 2.0};
  const double n = static_cast<double>(s.size());
  const double pi1 = static_cast<double>(s.positives()) / n;
  const double pi0 = 1.0 - pi1;
  const double severity = options.severity_ratio.value_or(pi0 / pi1);
  if (!(severity > 0.0) || !std::isfinite(severity)) fail(Errc::InvalidConfig, "severity ratio must be positive");
  // mode of the cost weight sits at c0 = 1 / (1 + severity)
  const double c0 = 1.0 / (1.0 + severity);
  return {1.0 + c0, 2.0 - c0};
}

double h_measure(const ScoredSet& s, const HMeasureOptions& options) {
  require_both_classes(s);
  const double n = static_cast<double>(s.size());
  const double pi1 = static_cast<double>(s.positives()) / n;
  const double pi0 = 1.0 - pi1;
  const auto [a, b] = h_measure_beta(s, options);
  const double loss = hull_loss(roc_hull(roc_points(s)), pi0, pi1, a, b);
  const double reference = hull_loss({{0.0, 0.0}, {1.0, 1.0}}, pi0, pi1, a, b);
  return std::clamp(1.0 - loss / reference, 0.0, 1.0);
}

double pr_auc(const ScoredSet& s) {
  const Eigen::Index n1 = s.positives();
  if (n1 == 0) fail(Errc::NoPositives, "average precision needs at least one positive");
  double ap = 0.0, prev_recall = 0.0;
  Eigen::Index tp = 0, fp = 0;
  for (const auto& [p, q] : descending_groups(s)) {
    tp += p;
    fp += q;
    const double recall = static_cast<double>(tp) / static_cast<double>(n1);
    ap += (recall - prev_recall) * static_cast<double>(tp) / static_cast<double>(tp + fp);
    prev_recall = recall;
  }
  return ap;
}

TopKMetrics topk_metrics(const ScoredSet& s, Eigen::Index k) {
  if (k <= 0 || k > s.size()) fail(Errc::BadK, "k = " + std::to_string(k) + " outside 1.." + std::to_string(s.size()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(s.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (s.scores(a) != s.scores(b)) return s.scores(a) > s.scores(b);
    return s.ids[static_cast<std::size_t>(a)] < s.ids[static_cast<std::size_t>(b)];
  });
  Eigen::Index tp = 0;
  for (Eigen::Index i = 0; i < k; ++i) tp += s.labels(order[static_cast<std::size_t>(i)]);
  TopKMetrics m;
  const Eigen::Index pos = s.positives();
  m.precision = static_cast<double>(tp) / static_cast<double>(k);
  m.recall = pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pos);
  m.f1 = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::vector<Eigen::Index> scale_topk(std::span<const int> reference_k, Eigen::Index reference_n, Eigen::Index n) {
  std::vector<Eigen::Index> out;
  for (int k : reference_k) {
    const auto scaled = static_cast<Eigen::Index>(
        std::llround(static_cast<double>(k) * static_cast<double>(n) / static_cast<double>(reference_n)));
    out.push_back(std::clamp<Eigen::Index>(scaled, 1, n));
  }
  return out;
}

Metric metric_by_name(const std::string& name) {
  if (name == "auc") return {name, [](const ScoredSet& s) { return auc(s); }};
  if (name == "ks") return {name, [](const ScoredSet& s) { return ks(s); }};
  if (name == "h") return {name, [](const ScoredSet& s) { return h_measure(s); }};
  if (name == "prauc") return {name, [](const ScoredSet& s) { return pr_auc(s); }};
  fail(Errc::InvalidConfig, "unknown metric '" + name + "'");
}

std::vector<double> bootstrap_values(const Metric& metric, std::span<const ScoredSet> runs,
                                     const BootstrapOptions& options, std::size_t* skipped) {
  if (runs.empty()) fail(Errc::AllDegenerate, "no runs");
  if (options.n_resamples < 1) fail(Errc::InvalidConfig, "n_resamples must be >= 1");
  for (const auto& r : runs)
    if (r.ids != runs.front().ids) fail(Errc::RowMismatch, "bootstrap runs must cover the same record ids");

  const auto n = runs.front().size();
  const std::size_t resamples = static_cast<std::size_t>(options.n_resamples);
  const std::size_t tasks = runs.size() * resamples;
  std::vector<double> slot(tasks, std::numeric_limits<double>::quiet_NaN());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t run = t / resamples;
      const std::size_t resample = t % resamples;
      const ScoredSet& s = runs[run];
      for (int attempt = 0; attempt <= options.max_redraws; ++attempt) {
        Rng rng(derive_seed(options.master_seed, {run, resample, static_cast<std::uint64_t>(attempt)}));
        Eigen::Index pos = 0;
        for (auto& r : rows) {
          r = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
          pos += s.labels(r);
        }
        if (pos == 0 || pos == n) continue;
        slot[t] = metric.fn(s.subset(rows));
        break;
      }
    }
  };
  const int n_threads = std::clamp<int>(options.workers, 1, static_cast<int>(std::min<std::size_t>(tasks, 64)));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
  }

  std::vector<double> values;
  values.reserve(tasks);
  std::size_t missed = 0;
  for (double v : slot) {
    if (std::isnan(v)) {
      ++missed;
    } else {
      values.push_back(v);
    }
  }
  if (skipped != nullptr) *skipped = missed;
  return values;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

MetricEstimate bootstrap(const Metric& metric, std::span<const ScoredSet> runs, const BootstrapOptions& options) {
  MetricEstimate e;
  e.metric = metric.name;
  auto values = bootstrap_values(metric, runs, options, &e.skipped_resamples);
  if (values.empty()) fail(Errc::AllDegenerate, "every resample lost a class");
  std::sort(values.begin(), values.end());
  // offsets from the minimum keep a constant sample exactly constant
  double offset_sum = 0.0;
  for (double v : values) offset_sum += v - values.front();
  e.mean = values.front() + offset_sum / static_cast<double>(values.size());
  e.ci_low = percentile(values, 0.025);
  e.ci_high = percentile(values, 0.975);
  e.n_estimates = values.size();
  return e;
}

std::string metric_estimate_json(const MetricEstimate& e) {
  nlohmann::ordered_json j;
  j["metric"] = e.metric;
  j["mean"] = e.mean;
  j["ci_low"] = e.ci_low;
  j["ci_high"] = e.ci_high;
  j["n_estimates"] = e.n_estimates;
  j["skipped_resamples"] = e.skipped_resamples;
  return j.dump();
}

std::string points_csv(const std::vector<std::pair<double, double>>& points, const std::string& x_name,
                       const std::string& y_name) {
  std::ostringstream out;
  out.precision(17);
  out << x_name << ',' << y_name << '\n';
  for (const auto& [x, y] : points) out << x << ',' << y << '\n';
  return out.str();
}

}  // namespace credtext
