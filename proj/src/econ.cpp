#include "credtext/econ.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "credtext/error.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("econ", code, detail); }

std::string money(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

}  // namespace

double loan_profit(int defaulted, double amount, double rate, const EconConfig& cfg) {
  // both branches share one expression so LGD = 0 makes them agree bit for bit
  const double owed = amount + amount * rate;
  const double recovery = defaulted == 1 ? 1.0 - cfg.lgd : 1.0;
  return owed * recovery - amount;
}

std::map<std::string, LoanEconomics> economics_of(const Dataset& dataset) {
  std::map<std::string, LoanEconomics> out;
  for (const auto& r : dataset.records) out.emplace(r.id, LoanEconomics{r.loan_amount, r.interest_rate, r.label});
  return out;
}

ProfitCurve profit_curve(const ScoredSet& scores, const std::map<std::string, LoanEconomics>& economics,
                         const EconConfig& cfg) {
  if (cfg.lgd < 0.0 || cfg.lgd > 1.0) fail(Errc::InvalidConfig, "lgd must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(scores.size());
  std::string missing;
  for (const auto& id : scores.ids)
    if (!economics.contains(id)) missing += missing.empty() ? id : ", " + id;
  if (!missing.empty()) fail(Errc::MissingEconomics, missing);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    if (scores.scores(ia) != scores.scores(ib)) return scores.scores(ia) > scores.scores(ib);
    return scores.ids[a] < scores.ids[b];
  });

  ProfitCurve curve;
  curve.points.resize(n + 1);
  curve.points[n].profit = 0.0;
  // suffix sums: the accepted set at k is order[k..N)
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t i = order[k];
    const auto& econ = economics.at(scores.ids[i]);
    const double p = loan_profit(scores.labels(static_cast<Eigen::Index>(i)), econ.amount, econ.rate, cfg);
    curve.points[k].profit = curve.points[k + 1].profit + p;
  }
  for (std::size_t k = 0; k <= n; ++k) {
    curve.points[k].rejected = k;
    if (k == 0) {
      curve.points[k].threshold = std::numeric_limits<double>::infinity();
    } else {
      curve.points[k].threshold = scores.scores(static_cast<Eigen::Index>(order[k - 1]));
      curve.points[k].rejected_id = scores.ids[order[k - 1]];
    }
  }
  return curve;
}

std::vector<double> profit_difference(const ProfitCurve& a, const ProfitCurve& b) {
  if (a.points.size() != b.points.size()) fail(Errc::PortfolioMismatch, "curves cover different portfolio sizes");
  std::multiset<std::string> ids_a, ids_b;
  for (std::size_t k = 1; k < a.points.size(); ++k) {
    ids_a.insert(a.points[k].rejected_id);
    ids_b.insert(b.points[k].rejected_id);
  }
  if (ids_a != ids_b) fail(Errc::PortfolioMismatch, "curves cover different borrowers");
  std::vector<double> diff(a.points.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = a.points[k].profit - b.points[k].profit;
  return diff;
}

ProfitMax profit_max_threshold(const ProfitCurve& curve) {
  if (curve.points.empty()) fail(Errc::PortfolioMismatch, "empty curve");
  ProfitMax best;
  best.profit = curve.points[0].profit;
  for (const auto& p : curve.points) {
    if (p.profit > best.profit) {
      best.profit = p.profit;
      best.rejected = p.rejected;
      best.threshold = p.threshold;
    }
  }
  return best;
}

std::string profit_curve_csv(const ProfitCurve& curve) {
  std::ostringstream out;
  out << "k,threshold,profit\n";
  for (const auto& p : curve.points) {
    out << p.rejected << ',';
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", p.threshold);
      out << buf;
    }
    out << ',' << money(p.profit) << '\n';
  }
  return out.str();
}

std::string profit_difference_csv(const std::vector<double>& diff) {
  std::ostringstream out;
  out << "k,diff\n";
  for (std::size_t k = 0; k < diff.size(); ++k) out << k << ',' << money(diff[k]) << '\n';
  return out.str();
}

}  // namespace credtext
