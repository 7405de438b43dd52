#include "credtext/explain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "credtext/error.hpp"
#include "credtext/rng.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("explain", code, detail); }

std::string trim(std::string_view s) {
  const auto cps = utf8::decode(s);
  std::size_t first = 0, last = cps.size();
  while (first < last && utf8::is_space(cps[first].value)) ++first;
  while (last > first && utf8::is_space(cps[last - 1].value)) --last;
  if (first == last) return {};
  const std::size_t begin = cps[first].offset;
  const std::size_t end = cps[last - 1].offset + cps[last - 1].length;
  return std::string(s.substr(begin, end - begin));
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Segmentation Segmentation::build(std::string_view text, Granularity granularity, const Tokenizer& tokenizer) {
  Segmentation seg;
  seg.granularity_ = granularity;
  if (granularity == Granularity::Word) {
    seg.units_ = tokenizer(text);
    if (seg.units_.empty()) fail(Errc::EmptyText, "text has no tokens");
    return seg;
  }
  // alternate content runs and delimiter runs
  const auto cps = utf8::decode(text);
  std::string pending_delims;
  std::string content;
  bool have_content = false;
  auto flush = [&] {
    std::string unit = trim(content);
    if (unit.empty()) {
      // whitespace-only content folds into the surrounding delimiters
      if (seg.raw_.empty()) {
        seg.prefix_ += content + pending_delims;
      } else {
        seg.trailing_.back() += content + pending_delims;
      }
    } else {
      seg.units_.push_back(std::move(unit));
      seg.raw_.push_back(content);
      seg.trailing_.push_back(pending_delims);
    }
    content.clear();
    pending_delims.clear();
    have_content = false;
  };
  for (const auto& cp : cps) {
    const std::string_view piece = text.substr(cp.offset, cp.length);
    if (utf8::is_phrase_delimiter(cp.value)) {
      pending_delims.append(piece);
    } else {
      if (!pending_delims.empty()) flush();
      content.append(piece);
      have_content = true;
    }
  }
  if (have_content || !pending_delims.empty()) flush();
  if (seg.units_.empty()) fail(Errc::EmptyText, "text has no phrases");
  return seg;
}

std::string Segmentation::reconstruct(const std::vector<bool>& mask) const {
  std::string out;
  if (granularity_ == Granularity::Word) {
    for (std::size_t i = 0; i < units_.size(); ++i) {
      if (!mask[i]) continue;
      if (!out.empty()) out += ' ';
      out += units_[i];
    }
    return out;
  }
  out = prefix_;
  for (std::size_t i = 0; i < units_.size(); ++i)
    if (mask[i]) out += raw_[i] + trailing_[i];
  return out;
}

Segmentation segment(std::string_view text, Granularity granularity, const Tokenizer& tokenizer) {
  if (text.empty()) fail(Errc::EmptyText, "empty text");
  return Segmentation::build(text, granularity, tokenizer);
}

LimeDesign lime_sample(const ScoreFn& score_fn, const Segmentation& seg, const LimeOptions& options) {
  const auto m = static_cast<Eigen::Index>(seg.size());
  if (m < 1) fail(Errc::EmptyText, "nothing to perturb");
  if (options.n_samples < 2) fail(Errc::DegenerateDesign, "need at least two perturbation samples");
  const double width = options.kernel_width.value_or(0.75 * std::sqrt(static_cast<double>(m)));

  // stable per-unit keys: text plus occurrence number among equal texts
  std::vector<std::uint64_t> unit_key(static_cast<std::size_t>(m));
  std::map<std::string, std::uint64_t> occurrences;
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& u = seg.units()[static_cast<std::size_t>(j)];
    unit_key[static_cast<std::size_t>(j)] = splitmix64(fnv1a(u) ^ splitmix64(occurrences[u]++));
  }

  LimeDesign d;
  d.masks = Eigen::MatrixXd::Ones(options.n_samples, m);
  d.scores.resize(options.n_samples);
  d.weights.resize(options.n_samples);
  std::vector<std::pair<double, Eigen::Index>> draw(static_cast<std::size_t>(m));
  std::vector<bool> mask(static_cast<std::size_t>(m));
  for (int s = 0; s < options.n_samples; ++s) {
    if (s > 0) {
      Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(s)}));
      const auto removed = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(m))) + 1;
      const std::uint64_t sample_salt = rng.next();
      // the `removed` units with the smallest keyed draws are dropped
      for (Eigen::Index j = 0; j < m; ++j)
        draw[static_cast<std::size_t>(j)] = {
            static_cast<double>(splitmix64(sample_salt ^ unit_key[static_cast<std::size_t>(j)]) >> 11), j};
      std::nth_element(draw.begin(), draw.begin() + (removed - 1), draw.end());
      for (Eigen::Index r = 0; r < removed; ++r) d.masks(s, draw[static_cast<std::size_t>(r)].second) = 0.0;
    }
    const double kept = d.masks.row(s).sum();
    for (Eigen::Index j = 0; j < m; ++j) mask[static_cast<std::size_t>(j)] = d.masks(s, j) != 0.0;
    d.scores(s) = score_fn(seg.reconstruct(mask));
    // cosine distance to the all-ones mask; an empty mask is orthogonal
    const double distance = kept > 0.0 ? 1.0 - std::sqrt(kept / static_cast<double>(m)) : 1.0;
    d.weights(s) = std::exp(-distance * distance / (width * width));
  }
  return d;
}

Eigen::VectorXd lime_coefficients(const LimeDesign& d, double ridge) {
  const double total_w = d.weights.sum();
  const Eigen::RowVectorXd x_mean = (d.weights.asDiagonal() * d.masks).colwise().sum() / total_w;
  const double y_mean = d.weights.dot(d.scores) / total_w;
  const Eigen::MatrixXd xc = d.masks.rowwise() - x_mean;
  const Eigen::VectorXd yc = d.scores.array() - y_mean;
  const Eigen::MatrixXd xtw = xc.transpose() * d.weights.asDiagonal();
  Eigen::MatrixXd gram = xtw * xc;
  gram.diagonal().array() += ridge;
  const Eigen::VectorXd rhs = xtw * yc;
  if (rhs.isZero(0.0)) return Eigen::VectorXd::Zero(d.masks.cols());
  if ((xc.array() == 0.0).all()) fail(Errc::DegenerateDesign, "all perturbation masks are identical");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || ldlt.isNegative())
    fail(Errc::DegenerateDesign, "surrogate normal equations are singular");
  Eigen::VectorXd beta = ldlt.solve(rhs);
  if (!beta.allFinite()) {
    // singular design without ridge: fall back to the minimum-norm solution
    beta = gram.completeOrthogonalDecomposition().solve(rhs);
  }
  return beta;
}

std::vector<Attribution> lime_explain(const ScoreFn& score_fn, std::string_view text, Granularity granularity,
                                      const Tokenizer& tokenizer, const LimeOptions& options) {
  const Segmentation seg = segment(text, granularity, tokenizer);
  const LimeDesign design = lime_sample(score_fn, seg, options);
  const Eigen::VectorXd beta = lime_coefficients(design, options.ridge);
  std::vector<Attribution> out;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    Attribution a;
    a.unit = seg.units()[static_cast<std::size_t>(j)];
    a.weight = beta(j);
    a.support = static_cast<std::size_t>(design.masks.col(j).sum());
    a.position = static_cast<std::size_t>(j);
    out.push_back(std::move(a));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Attribution& a, const Attribution& b) { return std::abs(a.weight) > std::abs(b.weight); });
  if (options.top_k > 0 && out.size() > static_cast<std::size_t>(options.top_k))
    out.resize(static_cast<std::size_t>(options.top_k));
  return out;
}

CaseSelection select_uncertain_cases(const std::vector<std::string>& ids, std::span<const double> structured_probs,
                                     std::span<const double> combined_probs, std::span<const int> labels,
                                     double band_lo, double band_hi, std::size_t top_n) {
  const std::size_t n = ids.size();
  if (structured_probs.size() != n || combined_probs.size() != n || labels.size() != n)
    fail(Errc::RowMismatch, "case arrays differ in length");
  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    const double ps = structured_probs[i];
    if (ps < band_lo || ps > band_hi) continue;
    const double y = labels[i];
    const double improvement = std::abs(ps - y) - std::abs(combined_probs[i] - y);
    if (improvement > 0.0) candidates.emplace_back(improvement, i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  CaseSelection sel;
  for (std::size_t r = 0; r < std::min(top_n, candidates.size()); ++r) {
    const std::size_t i = candidates[r].second;
    sel.ids.push_back(ids[i]);
    sel.structured_prob.push_back(structured_probs[i]);
    sel.combined_prob.push_back(combined_probs[i]);
    sel.improvement.push_back(candidates[r].first);
    sel.rows.push_back(i);
  }
  return sel;
}

std::vector<AggregatedUnit> aggregate_importance(const std::vector<std::vector<Attribution>>& per_case,
                                                 std::size_t top) {
  struct Acc {
    double sum = 0.0;
    std::size_t cases = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& attributions : per_case) {
    // a unit repeated within one case contributes its mean once
    std::map<std::string, std::pair<double, int>> in_case;
    for (const auto& a : attributions) {
      auto& [sum, count] = in_case[a.unit];
      sum += a.weight;
      ++count;
    }
    for (const auto& [unit, sc] : in_case) {
      acc[unit].sum += sc.first / sc.second;
      ++acc[unit].cases;
    }
  }
  std::vector<AggregatedUnit> out;
  for (const auto& [unit, a] : acc) out.push_back({unit, a.sum / static_cast<double>(a.cases), a.cases});
  std::stable_sort(out.begin(), out.end(), [](const AggregatedUnit& a, const AggregatedUnit& b) {
    return std::abs(a.mean_weight) > std::abs(b.mean_weight);
  });
  if (out.size() > top) out.resize(top);
  return out;
}

std::string attribution_csv(const std::vector<AggregatedUnit>& ranked) {
  std::ostringstream out;
  out.precision(17);
  out << "rank,unit,mean_weight,case_count\n";
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    std::string unit = ranked[r].unit;
    std::string quoted = "\"";
    for (char c : unit) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    out << r + 1 << ',' << quoted << ',' << ranked[r].mean_weight << ',' << ranked[r].case_count << '\n';
  }
  return out.str();
}

}  // namespace credtext
