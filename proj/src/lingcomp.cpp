#include "credtext/lingcomp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "credtext/error.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("lingcomp", code, detail); }

// Exact two-sided p of U via the distribution of doubled midrank sums of the
// smaller sample over all subsets of the pooled ranks.
double exact_mann_whitney_p(const std::vector<std::int64_t>& doubled_ranks, std::size_t n_small,
                            std::int64_t observed_doubled_sum) {
  const std::size_t total = doubled_ranks.size();
  const std::int64_t max_sum = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), std::int64_t{0});
  // ways[j][s]: number of j-subsets with doubled rank sum s (as probabilities-to-be, in long double)
  std::vector<std::vector<long double>> ways(n_small + 1, std::vector<long double>(static_cast<std::size_t>(max_sum) + 1, 0.0L));
  ways[0][0] = 1.0L;
  for (std::size_t i = 0; i < total; ++i) {
    const auto r = static_cast<std::size_t>(doubled_ranks[i]);
    for (std::size_t j = std::min(i + 1, n_small); j >= 1; --j) {
      auto& dst = ways[j];
      const auto& src = ways[j - 1];
      for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s) {
        if (src[s - r] != 0.0L) dst[s] += src[s - r];
        if (s == r) break;
      }
    }
  }
  long double all = 0.0L;
  for (long double w : ways[n_small]) all += w;
  // center of the doubled rank sum: n_small * (N + 1)
  const std::int64_t center = static_cast<std::int64_t>(n_small) * static_cast<std::int64_t>(total + 1);
  const std::int64_t observed_dev = std::llabs(observed_doubled_sum - center);
  long double tail = 0.0L;
  for (std::size_t s = 0; s < ways[n_small].size(); ++s) {
    if (ways[n_small][s] == 0.0L) continue;
    if (std::llabs(static_cast<std::int64_t>(s) - center) >= observed_dev) tail += ways[n_small][s];
  }
  return static_cast<double>(std::min(1.0L, tail / all));
}

}  // namespace

namespace detail {
void lingcomp_fail_zero_vector() { fail(Errc::ZeroVector, "cosine similarity of a zero vector"); }
void lingcomp_fail_dim(Eigen::Index a, Eigen::Index b) {
  fail(Errc::DimMismatch, std::to_string(a) + " vs " + std::to_string(b));
}
}  // namespace detail

double cosine_similarity(const Eigen::SparseVector<double>& u, const Eigen::SparseVector<double>& v) {
  if (u.size() != v.size()) detail::lingcomp_fail_dim(u.size(), v.size());
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) detail::lingcomp_fail_zero_vector();
  const double c = u.dot(v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(Errc::EmptySample, "both samples must be non-empty");
  const std::size_t n = a.size(), m = b.size(), total = n + m;

  // pooled midranks, doubled so they stay integral
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(total);
  for (double x : a) pooled.emplace_back(x, 0);
  for (double y : b) pooled.emplace_back(y, 1);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pooled[i].first < pooled[j].first; });
  std::vector<std::int64_t> doubled(total);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[order[j]].first == pooled[order[i]].first) ++j;
    const auto doubled_mid = static_cast<std::int64_t>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) doubled[order[k]] = doubled_mid;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  std::int64_t doubled_sum_a = 0;
  for (std::size_t i = 0; i < n; ++i) doubled_sum_a += doubled[i];

  MannWhitneyResult r;
  // U_a = R_a - n(n+1)/2
  r.u = static_cast<double>(doubled_sum_a - static_cast<std::int64_t>(n * (n + 1))) / 2.0;

  if (std::min(n, m) <= 8) {
    r.exact = true;
    if (n <= m) {
      r.p_two_sided = exact_mann_whitney_p(doubled, n, doubled_sum_a);
    } else {
      // enumerate subsets of the smaller sample: b
      std::vector<std::int64_t> reordered(doubled.begin() + static_cast<std::ptrdiff_t>(n), doubled.end());
      reordered.insert(reordered.end(), doubled.begin(), doubled.begin() + static_cast<std::ptrdiff_t>(n));
      const std::int64_t doubled_sum_b =
          std::accumulate(doubled.begin() + static_cast<std::ptrdiff_t>(n), doubled.end(), std::int64_t{0});
      r.p_two_sided = exact_mann_whitney_p(reordered, m, doubled_sum_b);
    }
    return r;
  }

  const double nd = static_cast<double>(n), md = static_cast<double>(m), td = static_cast<double>(total);
  const double mu = nd * md / 2.0;
  const double var = nd * md / 12.0 * ((td + 1.0) - tie_term / (td * (td - 1.0)));
  if (var <= 0.0) {
    r.p_two_sided = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(r.u - mu) - 0.5) / std::sqrt(var);
  r.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

double welch_proportion_t(double f1, double n1, double f2, double n2) {
  if (f1 < 0.0 || f1 > 1.0 || f2 < 0.0 || f2 > 1.0) fail(Errc::InvalidConfig, "frequencies must lie in [0, 1]");
  if (n1 < 1.0 || n2 < 1.0) fail(Errc::InvalidConfig, "token totals must be >= 1");
  const double var = f1 * (1.0 - f1) / n1 + f2 * (1.0 - f2) / n2;
  if (var == 0.0) fail(Errc::ZeroVariance, "both proportions are 0 or 1");
  return (f2 - f1) / std::sqrt(var);
}

double bonferroni_critical(double alpha, int tests) {
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(boost::math::complement(standard, bonferroni_level(alpha, tests) / 2.0));
}

bool CategoryDictionary::matches(std::size_t category, const std::string& token) const {
  for (const auto& entry : categories[category].second) {
    if (!entry.empty() && entry.back() == '*') {
      const std::string_view prefix(entry.data(), entry.size() - 1);
      if (token.size() >= prefix.size() && std::string_view(token).substr(0, prefix.size()) == prefix) return true;
    } else if (entry == token) {
      return true;
    }
  }
  return false;
}

CategoryDictionary parse_dictionary(const std::string& text) {
  CategoryDictionary dict;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    line = line.substr(start);
    if (line.rfind("%category", 0) == 0) {
      std::string name = line.substr(9);
      const auto ns = name.find_first_not_of(" \t");
      if (ns == std::string::npos) fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": unnamed category");
      dict.categories.emplace_back(name.substr(ns), std::vector<std::string>{});
      continue;
    }
    if (dict.categories.empty())
      fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": entry before any %category header");
    const auto star = line.find('*');
    if (star != std::string::npos && star != line.size() - 1)
      fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": '*' is only allowed at the end");
    dict.categories.back().second.push_back(line);
  }
  for (const auto& [name, entries] : dict.categories)
    if (entries.empty()) fail(Errc::MalformedLine, "category '" + name + "' has no entries");
  return dict;
}

CategoryDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dictionary(buf.str());
}

namespace {

std::pair<std::vector<double>, double> category_counts(std::span<const TokenList> docs, const CategoryDictionary& dict) {
  std::map<std::string, std::size_t> token_counts;
  std::size_t total = 0;
  for (const auto& d : docs) {
    for (const auto& t : d) ++token_counts[t];
    total += d.size();
  }
  if (total == 0) fail(Errc::EmptyCorpus, "no tokens");
  std::vector<double> counts(dict.categories.size(), 0.0);
  for (const auto& [token, c] : token_counts)
    for (std::size_t k = 0; k < dict.categories.size(); ++k)
      if (dict.matches(k, token)) counts[k] += static_cast<double>(c);
  return {counts, static_cast<double>(total)};
}

}  // namespace

std::vector<std::pair<std::string, double>> category_frequencies(std::span<const TokenList> docs,
                                                                 const CategoryDictionary& dict) {
  const auto [counts, total] = category_counts(docs, dict);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t k = 0; k < counts.size(); ++k) out.emplace_back(dict.categories[k].first, counts[k] / total);
  return out;
}

std::vector<CategoryComparison> compare_corpora(std::span<const TokenList> corpus1, std::span<const TokenList> corpus2,
                                                const CategoryDictionary& dict, int tests) {
  const int m = tests > 0 ? tests : static_cast<int>(dict.categories.size());
  const auto [c1, n1] = category_counts(corpus1, dict);
  const auto [c2, n2] = category_counts(corpus2, dict);
  std::array<double, 3> critical{};
  for (std::size_t l = 0; l < kSignificanceLevels.size(); ++l) critical[l] = bonferroni_critical(kSignificanceLevels[l], m);

  std::vector<CategoryComparison> rows;
  for (std::size_t k = 0; k < dict.categories.size(); ++k) {
    CategoryComparison row;
    row.category = dict.categories[k].first;
    row.n1 = n1;
    row.n2 = n2;
    row.f1 = c1[k] / n1;
    row.f2 = c2[k] / n2;
    try {
      row.t = welch_proportion_t(row.f1, n1, row.f2, n2);
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroVariance) throw;
      // both proportions degenerate: equal means no evidence, unequal is decisive
      row.t = row.f1 == row.f2 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), row.f2 - row.f1);
    }
    for (std::size_t l = 0; l < critical.size(); ++l) row.significant[l] = std::abs(row.t) > critical[l];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string comparison_csv(const std::vector<CategoryComparison>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "category,f_human,f_refined,t,p_0.1,p_0.05,p_0.01\n";
  for (const auto& r : rows) {
    out << r.category << ',' << r.f1 << ',' << r.f2 << ',' << r.t;
    for (bool s : r.significant) out << ',' << (s ? "*" : "");
    out << '\n';
  }
  return out.str();
}

}  // namespace credtext
