#pragma once

// Independent reference implementations and generators used by the tests.
// None of these call into the library's metric code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

namespace oracle {

struct Scored {
  std::vector<double> scores;
  std::vector<int> labels;
};

inline double auc(const Scored& s) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.scores.size(); ++j) {
      if (s.labels[j] != 0) continue;
      pairs += 1.0;
      if (s.scores[i] > s.scores[j])
        num += 1.0;
      else if (s.scores[i] == s.scores[j])
        num += 0.5;
    }
  }
  return num / pairs;
}

// Threshold t predicts positive for score >= t; every distinct score plus +inf.
inline std::vector<std::pair<double, double>> rates(const Scored& s) {
  std::set<double> thresholds(s.scores.begin(), s.scores.end());
  std::vector<double> ts(thresholds.begin(), thresholds.end());
  ts.push_back(INFINITY);
  double p = 0, n = 0;
  for (int l : s.labels) (l == 1 ? p : n) += 1;
  std::vector<std::pair<double, double>> out;  // (fpr, tpr)
  for (double t : ts) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i)
      if (s.scores[i] >= t) (s.labels[i] == 1 ? tp : fp) += 1;
    out.emplace_back(fp / n, tp / p);
  }
  return out;
}

inline double ks(const Scored& s) {
  double best = 0.0;
  for (const auto& [f, t] : rates(s)) best = std::max(best, std::abs(t - f));
  return best;
}

inline double average_precision(const Scored& s) {
  std::set<double, std::greater<>> thresholds(s.scores.begin(), s.scores.end());
  double p = 0;
  for (int l : s.labels) p += l;
  double ap = 0.0, prev = 0.0;
  for (double t : thresholds) {
    double tp = 0, k = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i)
      if (s.scores[i] >= t) {
        k += 1;
        tp += s.labels[i];
      }
    const double recall = tp / p;
    ap += (recall - prev) * (tp / k);
    prev = recall;
  }
  return ap;
}

inline double beta_pdf(double c, double a, double b) {
  if (c <= 0.0 || c >= 1.0) return 0.0;
  const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  return std::exp(log_norm + (a - 1.0) * std::log(c) + (b - 1.0) * std::log1p(-c));
}

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                      double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double eps = 1e-13) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), eps, 60);
}

// H = 1 - int L(c) u(c) dc / int L_ref(c) u(c) dc with
// L(c) = min over thresholds of c pi0 FPR + (1 - c) pi1 (1 - TPR).
inline double h_measure(const Scored& s, double a, double b) {
  const auto pts = rates(s);
  double p = 0;
  for (int l : s.labels) p += l;
  const double pi1 = p / static_cast<double>(s.labels.size()), pi0 = 1.0 - pi1;
  const auto loss = [&](double c) {
    double best = INFINITY;
    for (const auto& [f, t] : pts) best = std::min(best, c * pi0 * f + (1.0 - c) * pi1 * (1.0 - t));
    return best * beta_pdf(c, a, b);
  };
  const auto ref = [&](double c) { return std::min(c * pi0, (1.0 - c) * pi1) * beta_pdf(c, a, b); };
  // split at the kinks of the reference so each piece is smooth on one side
  const double kink = pi1;
  const double l = integrate(loss, 0.0, kink) + integrate(loss, kink, 1.0);
  const double r = integrate(ref, 0.0, kink) + integrate(ref, kink, 1.0);
  return 1.0 - l / r;
}

// Exhaustive two-sided Mann-Whitney p: all ways to assign pooled values to
// the first sample.
inline double mann_whitney_exact_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = a.size(), total = pooled.size();
  const auto u_of = [&](const std::vector<bool>& in_a) {
    double u = 0;
    for (std::size_t i = 0; i < total; ++i) {
      if (!in_a[i]) continue;
      for (std::size_t j = 0; j < total; ++j) {
        if (in_a[j]) continue;
        u += pooled[i] > pooled[j] ? 1.0 : (pooled[i] == pooled[j] ? 0.5 : 0.0);
      }
    }
    return u;
  };
  std::vector<bool> observed(total, false);
  for (std::size_t i = 0; i < n; ++i) observed[i] = true;
  const double center = static_cast<double>(n * (total - n)) / 2.0;
  const double dev = std::abs(u_of(observed) - center);
  std::vector<bool> mask(total, false);
  std::fill(mask.end() - static_cast<std::ptrdiff_t>(n), mask.end(), true);
  double hits = 0, all = 0;
  do {
    all += 1;
    if (std::abs(u_of(mask) - center) >= dev - 1e-12) hits += 1;
  } while (std::next_permutation(mask.begin(), mask.end()));
  return hits / all;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k < j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j - 1);
      i = j;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle

namespace gen {

// Random scored set with both classes and deliberate ties.
inline oracle::Scored scored_set(std::mt19937_64& rng, std::size_t max_n = 50) {
  std::uniform_int_distribution<std::size_t> size(2, max_n);
  const std::size_t n = size(rng);
  std::uniform_int_distribution<int> level(0, static_cast<int>(std::max<std::size_t>(n / 3, 2)));
  std::bernoulli_distribution coin(0.4);
  oracle::Scored s;
  for (std::size_t i = 0; i < n; ++i) {
    s.scores.push_back(level(rng) / 10.0);
    s.labels.push_back(coin(rng) ? 1 : 0);
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  std::shuffle(s.labels.begin(), s.labels.end(), rng);
  return s;
}

}  // namespace gen

namespace testing_support {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("credtext-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testing_support

namespace gen {

// Two topics over disjoint vocabularies "a0".."a49" and "b0".."b49"; the
// first half of the documents draws from topic a.
inline std::vector<std::vector<std::string>> disjoint_corpus(std::uint64_t seed, std::size_t docs = 200,
                                                             std::size_t length = 100) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 49);
  std::vector<std::vector<std::string>> out(docs);
  for (std::size_t d = 0; d < docs; ++d) {
    const char* prefix = d < docs / 2 ? "a" : "b";
    for (std::size_t t = 0; t < length; ++t) out[d].push_back(prefix + std::to_string(word(rng)));
  }
  return out;
}

}  // namespace gen
