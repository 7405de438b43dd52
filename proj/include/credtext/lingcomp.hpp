#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "credtext/textfeat.hpp"

namespace credtext {

namespace detail {
[[noreturn]] void lingcomp_fail_zero_vector();
[[noreturn]] void lingcomp_fail_dim(Eigen::Index a, Eigen::Index b);
}  // namespace detail

/// u . v / (|u| |v|) for any two dense Eigen vectors of equal size.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v) {
  if (u.size() != v.size()) detail::lingcomp_fail_dim(u.size(), v.size());
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) detail::lingcomp_fail_zero_vector();
  const double c = u.dot(v) / (nu * nv);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

double cosine_similarity(const Eigen::SparseVector<double>& u, const Eigen::SparseVector<double>& v);

struct MannWhitneyResult {
  double u = 0.0;  // for sample a: pairs with x > y plus half the ties
  double p_two_sided = 1.0;
  bool exact = false;
};

/// Exact null distribution when min(n, m) <= 8, otherwise the normal
/// approximation with tie-corrected variance and continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// (f2 - f1) / sqrt(f1(1-f1)/N1 + f2(1-f2)/N2); positive when corpus 2 uses
/// the category more.
double welch_proportion_t(double f1, double n1, double f2, double n2);

inline double bonferroni_level(double alpha, int tests) { return alpha / tests; }

/// Two-sided standard-normal critical value at per-test level alpha / tests.
double bonferroni_critical(double alpha, int tests);

/// Category -> entries. An entry ending in '*' matches by prefix.
struct CategoryDictionary {
  std::vector<std::pair<std::string, std::vector<std::string>>> categories;

  bool matches(std::size_t category, const std::string& token) const;
};

/// File format: "%category <name>" opens a block; each following non-empty
/// line is an entry. Lines starting with '#' are comments.
CategoryDictionary load_dictionary(const std::filesystem::path& path);
CategoryDictionary parse_dictionary(const std::string& text);

/// Matched tokens / total tokens, per category in dictionary order. A token
/// counts toward every category it matches.
std::vector<std::pair<std::string, double>> category_frequencies(std::span<const TokenList> docs,
                                                                 const CategoryDictionary& dict);

inline constexpr std::array<double, 3> kSignificanceLevels = {0.1, 0.05, 0.01};

struct CategoryComparison {
  std::string category;
  double f1 = 0.0, f2 = 0.0;
  double n1 = 0.0, n2 = 0.0;
  double t = 0.0;
  std::array<bool, 3> significant{};  // at 0.1, 0.05, 0.01 (each / M)
};

/// Per-category Welch t between corpus 1 and corpus 2 with Bonferroni
/// correction over `tests` comparisons (0: number of categories).
std::vector<CategoryComparison> compare_corpora(std::span<const TokenList> corpus1, std::span<const TokenList> corpus2,
                                                const CategoryDictionary& dict, int tests = 0);

std::string comparison_csv(const std::vector<CategoryComparison>& rows);

}  // namespace credtext
