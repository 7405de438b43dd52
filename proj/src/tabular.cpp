#include "credtext/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "credtext/error.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("tabular", code, detail); }

}  // namespace

int FeatureBinning::bin_of(const FeatureValue& value) const {
  if (kind == FeatureKind::Continuous) {
    const auto* x = std::get_if<double>(&value);
    if (x == nullptr) fail(Errc::SchemaMismatch, "feature '" + name + "' holds a non-numeric or missing value");
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), *x) - edges.begin());
  }
  std::string level;
  if (const auto* s = std::get_if<std::string>(&value)) {
    level = *s;
  } else if (is_missing(value)) {
    level = kMissingCategory;
  } else {
    fail(Errc::SchemaMismatch, "feature '" + name + "' holds a numeric value");
  }
  auto it = levels.find(level);
  return it == levels.end() ? unseen_bin() : it->second;
}

Dataset impute(const Dataset& dataset, std::span<const std::size_t> train_indices) {
  if (train_indices.empty()) fail(Errc::AllMissingFeature, "empty training index set");
  Dataset out = dataset;
  for (const auto& spec : dataset.schema) {
    if (spec.kind == FeatureKind::Categorical) {
      for (auto& r : out.records) {
        auto& v = r.features.at(spec.name);
        if (is_missing(v)) v = std::string(kMissingCategory);
      }
      continue;
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i : train_indices) {
      if (const auto* x = std::get_if<double>(&dataset.records.at(i).features.at(spec.name))) {
        sum += *x;
        ++n;
      }
    }
    if (n == 0) fail(Errc::AllMissingFeature, "feature '" + spec.name + "' is missing in every training row");
    const double mean = sum / static_cast<double>(n);
    for (auto& r : out.records) {
      auto& v = r.features.at(spec.name);
      if (is_missing(v)) v = mean;
    }
  }
  return out;
}

BinningSpec fit_binning(const Dataset& dataset, std::span<const std::size_t> train_indices, int quantile_bins) {
  if (quantile_bins < 1) fail(Errc::InvalidConfig, "quantile_bins must be >= 1");
  BinningSpec spec;
  for (const auto& f : dataset.schema) {
    FeatureBinning b;
    b.name = f.name;
    b.kind = f.kind;
    if (f.kind == FeatureKind::Continuous) {
      std::vector<double> xs;
      for (std::size_t i : train_indices)
        if (const auto* x = std::get_if<double>(&dataset.records.at(i).features.at(f.name))) xs.push_back(*x);
      std::sort(xs.begin(), xs.end());
      if (!xs.empty()) {
        for (int q = 1; q < quantile_bins; ++q) {
          const auto pos = static_cast<std::size_t>(
              std::ceil(static_cast<double>(q) * static_cast<double>(xs.size()) / quantile_bins));
          if (pos >= xs.size()) continue;
          const double edge = xs[pos];
          // an edge at the minimum would leave the first bin empty
          if (edge <= xs.front()) continue;
          if (b.edges.empty() || edge > b.edges.back()) b.edges.push_back(edge);
        }
      }
    } else {
      std::set<std::string> levels;
      for (std::size_t i : train_indices) {
        const auto& v = dataset.records.at(i).features.at(f.name);
        if (const auto* s = std::get_if<std::string>(&v)) {
          levels.insert(*s);
        } else if (is_missing(v)) {
          levels.insert(kMissingCategory);
        }
      }
      int id = 0;
      for (const auto& level : levels) b.levels.emplace(level, id++);
    }
    spec.features.push_back(std::move(b));
  }
  return spec;
}

double woe_value(double good, double bad, double total_good, double total_bad, double smoothing, int n_bins) {
  const double pg = (good + smoothing) / (total_good + smoothing * n_bins);
  const double pb = (bad + smoothing) / (total_bad + smoothing * n_bins);
  return std::log(pg / pb);
}

double iv_from_counts(std::span<const double> good, std::span<const double> bad, double smoothing) {
  const int n_bins = static_cast<int>(good.size());
  double g_total = 0.0, b_total = 0.0;
  for (int k = 0; k < n_bins; ++k) {
    g_total += good[k];
    b_total += bad[k];
  }
  double iv = 0.0;
  for (int k = 0; k < n_bins; ++k) {
    const double pg = (good[k] + smoothing) / (g_total + smoothing * n_bins);
    const double pb = (bad[k] + smoothing) / (b_total + smoothing * n_bins);
    if (pg == pb) continue;  // also covers 0 * ln(0/0)
    iv += (pg - pb) * std::log(pg / pb);
  }
  return std::max(iv, 0.0);
}

WoeTable fit_woe(const Dataset& dataset, std::span<const std::size_t> train_indices, const BinningSpec& binning,
                 double smoothing) {
  if (smoothing < 0.0) fail(Errc::InvalidConfig, "smoothing must be >= 0");
  double goods = 0.0, bads = 0.0;
  for (std::size_t i : train_indices) (dataset.records.at(i).label == 1 ? bads : goods) += 1.0;
  if (goods == 0.0 || bads == 0.0) fail(Errc::SingleClassTrain, "training rows must contain both labels");

  WoeTable table;
  for (const auto& fb : binning.features) {
    FeatureWoe fw;
    fw.binning = fb;
    fw.total_good = goods;
    fw.total_bad = bads;
    fw.smoothing = smoothing;
    fw.bins.assign(fb.bin_count(), BinStats{});
    for (std::size_t i : train_indices) {
      const auto& r = dataset.records.at(i);
      const int bin = fb.bin_of(r.features.at(fb.name));
      if (bin < 0) fail(Errc::UnfittedFeature, "training value outside the binning of '" + fb.name + "'");
      (r.label == 1 ? fw.bins[bin].bad : fw.bins[bin].good) += 1.0;
    }
    std::vector<double> g, b;
    for (auto& bin : fw.bins) {
      bin.woe = woe_value(bin.good, bin.bad, goods, bads, smoothing, fb.bin_count());
      if (!std::isfinite(bin.woe))
        fail(Errc::NonFiniteValue, "WoE of '" + fb.name + "' is not finite; use a positive smoothing");
      g.push_back(bin.good);
      b.push_back(bin.bad);
    }
    fw.iv = iv_from_counts(g, b, smoothing);
    table.features.push_back(std::move(fw));
  }
  return table;
}

const FeatureWoe* WoeTable::find(const std::string& name) const {
  for (const auto& f : features)
    if (f.binning.name == name) return &f;
  return nullptr;
}

double information_value(const WoeTable& table, const std::string& feature) {
  const FeatureWoe* f = table.find(feature);
  if (f == nullptr) fail(Errc::UnknownFeature, feature);
  return f->iv;
}

std::vector<std::string> select_by_iv(const WoeTable& table, double lo, double hi) {
  std::vector<std::string> out;
  for (const auto& f : table.features)
    if (f.iv > lo && f.iv < hi) out.push_back(f.binning.name);
  return out;
}

Eigen::VectorXd variance_inflation(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::VectorXd vif(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    Eigen::MatrixXd design(n, p);
    design.col(0).setOnes();
    for (Eigen::Index j = 0, c = 1; j < p; ++j)
      if (j != k) design.col(c++) = x.col(j);
    const Eigen::VectorXd y = x.col(k);
    const double ybar = y.mean();
    const double sst = (y.array() - ybar).square().sum();
    const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    if (sst <= 1e-24 * scale * scale * static_cast<double>(n)) {
      vif(k) = std::numeric_limits<double>::infinity();
      continue;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    const Eigen::VectorXd beta = qr.solve(y);
    const double sse = (y - design * beta).squaredNorm();
    const double one_minus_r2 = sse / sst;
    vif(k) = one_minus_r2 <= 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / one_minus_r2;
  }
  return vif;
}

std::vector<std::string> vif_filter(const EncodedMatrix& matrix, double threshold) {
  std::vector<Eigen::Index> kept(static_cast<std::size_t>(matrix.cols()));
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) kept[static_cast<std::size_t>(j)] = j;
  if (matrix.cols() >= 2 && matrix.rows() < matrix.cols())
    fail(Errc::TooFewRows, std::to_string(matrix.rows()) + " rows for " + std::to_string(matrix.cols()) + " columns");

  while (kept.size() >= 2) {
    Eigen::MatrixXd sub(matrix.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = matrix.values.col(kept[c]);
    const Eigen::VectorXd vif = variance_inflation(sub);
    // the last column wins ties, so the earlier of two duplicates survives
    Eigen::Index worst = 0;
    for (Eigen::Index c = 1; c < vif.size(); ++c)
      if (vif(c) >= vif(worst)) worst = c;
    if (!(vif(worst) > threshold)) break;
    kept.erase(kept.begin() + worst);
  }
  std::vector<std::string> out;
  for (Eigen::Index j : kept) out.push_back(matrix.columns[static_cast<std::size_t>(j)]);
  return out;
}

EncodedMatrix encode(const Dataset& dataset, const WoeTable& table, const std::vector<std::string>& selected) {
  std::vector<const FeatureWoe*> feats;
  for (const auto& name : selected) {
    const FeatureWoe* f = table.find(name);
    if (f == nullptr) fail(Errc::UnfittedFeature, name);
    feats.push_back(f);
  }
  EncodedMatrix m;
  m.ids = dataset.ids();
  m.columns = selected;
  m.values.resize(static_cast<Eigen::Index>(dataset.size()), static_cast<Eigen::Index>(selected.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& r = dataset.records[i];
    for (std::size_t j = 0; j < feats.size(); ++j) {
      const int bin = feats[j]->binning.bin_of(r.features.at(feats[j]->binning.name));
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          bin < 0 ? 0.0 : feats[j]->bins[static_cast<std::size_t>(bin)].woe;
    }
  }
  return m;
}

EncodedMatrix select_columns(const EncodedMatrix& matrix, const std::vector<std::string>& columns) {
  EncodedMatrix out;
  out.ids = matrix.ids;
  out.columns = columns;
  out.values.resize(matrix.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    auto it = std::find(matrix.columns.begin(), matrix.columns.end(), columns[c]);
    if (it == matrix.columns.end()) fail(Errc::UnknownFeature, columns[c]);
    out.values.col(static_cast<Eigen::Index>(c)) = matrix.values.col(it - matrix.columns.begin());
  }
  return out;
}

EncodedMatrix select_rows(const EncodedMatrix& matrix, std::span<const std::size_t> rows) {
  EncodedMatrix out;
  out.columns = matrix.columns;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), matrix.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.ids.push_back(matrix.ids.at(rows[r]));
    out.values.row(static_cast<Eigen::Index>(r)) = matrix.values.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

std::string woe_table_to_json(const WoeTable& table) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& f : table.features) {
    nlohmann::ordered_json feat;
    feat["kind"] = f.binning.kind == FeatureKind::Continuous ? "continuous" : "categorical";
    feat["iv"] = f.iv;
    feat["total_good"] = f.total_good;
    feat["total_bad"] = f.total_bad;
    feat["smoothing"] = f.smoothing;
    if (f.binning.kind == FeatureKind::Continuous) feat["edges"] = f.binning.edges;
    nlohmann::ordered_json bins = nlohmann::ordered_json::array();
    std::vector<std::string> names(f.bins.size());
    for (const auto& [level, id] : f.binning.levels) names[static_cast<std::size_t>(id)] = level;
    for (std::size_t b = 0; b < f.bins.size(); ++b) {
      nlohmann::ordered_json bin;
      if (f.binning.kind == FeatureKind::Categorical) {
        bin["level"] = names[b];
      } else {
        bin["bin"] = b;
      }
      bin["good"] = f.bins[b].good;
      bin["bad"] = f.bins[b].bad;
      bin["woe"] = f.bins[b].woe;
      bins.push_back(std::move(bin));
    }
    feat["bins"] = std::move(bins);
    doc[f.binning.name] = std::move(feat);
  }
  return doc.dump(2);
}

}  // namespace credtext
