#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "credtext/corpus.hpp"
#include "credtext/eval.hpp"

namespace credtext {

struct EconConfig {
  double lgd = 0.9;  // loss given default
};

/// Profit of one accepted loan: a defaulter repays L(1+r)(1-LGD), a
/// non-defaulter L(1+r); the principal L is subtracted in both cases.
/// Term and timing are ignored.
double loan_profit(int defaulted, double amount, double rate, const EconConfig& cfg = {});

struct LoanEconomics {
  double amount = 0.0;
  double rate = 0.0;
  int label = 0;
};

std::map<std::string, LoanEconomics> economics_of(const Dataset& dataset);

struct ProfitPoint {
  std::size_t rejected = 0;  // k
  double threshold = 0.0;    // score of the k-th rejected borrower; +inf at k = 0
  double profit = 0.0;       // total over the accepted borrowers
  std::string rejected_id;   // borrower rejected at this step; empty at k = 0
};

struct ProfitCurve {
  std::vector<ProfitPoint> points;  // k = 0..N

  std::size_t size() const noexcept { return points.empty() ? 0 : points.size() - 1; }
};

/// Rejects borrowers in descending score order (ties by id) and sums the
/// profit of the rest. Point k satisfies profit(k) = profit(k+1) +
/// loan_profit(borrower rejected at k+1) bit for bit, and profit(N) = 0.
/// Labels come from the scored set.
ProfitCurve profit_curve(const ScoredSet& scores, const std::map<std::string, LoanEconomics>& economics,
                         const EconConfig& cfg = {});

/// a(k) - b(k); positive where model A is more profitable.
std::vector<double> profit_difference(const ProfitCurve& a, const ProfitCurve& b);

struct ProfitMax {
  std::size_t rejected = 0;
  double threshold = std::numeric_limits<double>::infinity();
  double profit = 0.0;
};

/// Smallest k achieving the maximum profit.
ProfitMax profit_max_threshold(const ProfitCurve& curve);

std::string profit_curve_csv(const ProfitCurve& curve);
std::string profit_difference_csv(const std::vector<double>& diff);

}  // namespace credtext
