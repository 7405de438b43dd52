#include "credtext/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "credtext/error.hpp"
#include "credtext/refine.hpp"
#include "credtext/rng.hpp"
#include "credtext/textfeat.hpp"
#include "credtext/tokenize.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("synthgen", code, detail); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string strip_period(const std::string& s) {
  std::string out = s;
  while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n == 0) fail(Errc::InvalidConfig, "n must be positive");
  if (!(default_rate > 0.0 && default_rate < 1.0)) fail(Errc::InvalidConfig, "default_rate must lie in (0, 1)");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) fail(Errc::InvalidConfig, "missing_rate must lie in [0, 1)");
  if (risky_clauses.empty() || safe_clauses.empty()) fail(Errc::InvalidConfig, "clause banks must be non-empty");
  const std::size_t bank = risky_clauses.size() + safe_clauses.size() + neutral_clauses.size();
  if (clauses_min < 1 || clauses_max < clauses_min || static_cast<std::size_t>(clauses_max) > bank)
    fail(Errc::InvalidConfig, "clauses per text must satisfy 1 <= min <= max <= bank size");
  for (const auto* b : {&risky_clauses, &safe_clauses, &neutral_clauses})
    for (const auto& c : *b) {
      if (!std::isfinite(c.contribution)) fail(Errc::InvalidConfig, "non-finite clause contribution");
      if (c.text.empty()) fail(Errc::InvalidConfig, "empty clause text");
    }
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.name.empty() || !names.insert(f.name).second) fail(Errc::InvalidConfig, "duplicate or empty feature name");
    if (!std::isfinite(f.strength)) fail(Errc::InvalidConfig, "non-finite strength for " + f.name);
    if (f.kind == FeatureKind::Categorical && (f.levels.empty() || f.levels.size() != f.level_effects.size()))
      fail(Errc::InvalidConfig, "categorical feature " + f.name + " needs one effect per level");
  }
  if (!(amount_min > 0.0 && amount_max >= amount_min)) fail(Errc::InvalidConfig, "bad loan amount range");
  if (!(rate_min >= 0.0 && rate_max >= rate_min)) fail(Errc::InvalidConfig, "bad interest rate range");
}

std::vector<SynthFeature> default_features(double s) {
  std::vector<SynthFeature> f;
  f.push_back({"age", FeatureKind::Continuous, -0.2 * s, 38.0, 9.0, {}, {}});
  f.push_back({"monthly_income", FeatureKind::Continuous, -0.6 * s, 12000.0, 4000.0, {}, {}});
  f.push_back({"debt_ratio", FeatureKind::Continuous, 0.7 * s, 0.4, 0.15, {}, {}});
  f.push_back({"years_in_business", FeatureKind::Continuous, -0.3 * s, 6.0, 3.0, {}, {}});
  f.push_back({"branch_code", FeatureKind::Continuous, 0.0, 50.0, 20.0, {}, {}});
  f.push_back({"credit_grade", FeatureKind::Categorical, 0.5 * s, 0.0, 1.0, {"AA", "A", "B", "C"}, {-1.0, -0.3, 0.4, 1.2}});
  f.push_back({"sector", FeatureKind::Categorical, 0.0, 0.0, 1.0,
               {"retail", "manufacturing", "services", "agriculture"}, {0.0, 0.0, 0.0, 0.0}});
  return f;
}

std::vector<Clause> default_risky_clauses(double s) {
  return {
      {"The borrower had several overdue credit card payments last year.", 1.2 * s},
      {"The shop inventory is slow moving and partly obsolete.", 0.8 * s},
      {"Receivables are large relative to monthly turnover.", 0.7 * s},
      {"The borrower recently changed the business address twice.", 0.6 * s},
      {"Existing debts at other lenders exceed the requested amount.", 1.0 * s},
      {"Sales records could not be reconciled with bank statements.", 0.9 * s},
      {"The spouse is unaware of the loan application.", 0.7 * s},
      {"A guarantor withdrew shortly before the interview.", 0.8 * s},
      {"The lease on the premises expires within three months.", 0.6 * s},
      {"Gambling expenses appear in the card transactions.", 1.3 * s},
      {"The borrower gave inconsistent answers about household expenses.", 0.7 * s},
      {"Supplier complaints about late settlement were reported.", 0.9 * s},
  };
}

std::vector<Clause> default_safe_clauses(double s) {
  return {
      {"The borrower has good peer relationships and cooperates with the investigation.", -0.6 * s},
      {"Valid documentation was provided promptly.", -0.5 * s},
      {"The family owns a registered apartment without mortgage.", -0.9 * s},
      {"Monthly cash flow is stable and well documented.", -0.8 * s},
      {"The borrower has long experience in this trade.", -0.6 * s},
      {"Customers are loyal and orders are recurring.", -0.5 * s},
      {"Previous loans from the bank were repaid early.", -1.1 * s},
      {"Savings deposits cover several months of instalments.", -0.9 * s},
      {"The spouse runs a profitable stall and supports repayment.", -0.6 * s},
      {"Tax filings match the declared revenue.", -0.7 * s},
      {"The borrower understands the consequences of default.", -0.4 * s},
      {"Suppliers grant generous payment terms to the shop.", -0.5 * s},
  };
}

std::vector<Clause> default_neutral_clauses() {
  return {
      {"The loan will be used to purchase seasonal stock.", 0.0},
      {"The interview took place at the borrower's shop.", 0.0},
      {"The borrower is married with one child.", 0.0},
      {"The shop is located near a residential district.", 0.0},
      {"The credit officer visited the premises in the afternoon.", 0.0},
      {"The requested term matches the stock turnover cycle.", 0.0},
      {"The borrower heard about the product from a neighbour.", 0.0},
      {"Cash and bank balances were counted during the visit.", 0.0},
  };
}

SynthConfig synth_preset(const std::string& name) {
  SynthConfig cfg;
  const auto fill = [&](double tab, double text) {
    cfg.features = default_features(tab);
    cfg.risky_clauses = default_risky_clauses(text);
    cfg.safe_clauses = default_safe_clauses(text);
    cfg.neutral_clauses = default_neutral_clauses();
  };
  if (name == "reference") {
    fill(1.0, 1.0);
  } else if (name == "balanced") {
    fill(1.0, 1.0);
    cfg.default_rate = 0.10;
  } else if (name == "acceptance") {
    fill(1.0, 1.5);
    cfg.n = 2000;
    cfg.default_rate = 0.10;
  } else if (name == "no_signal") {
    fill(0.0, 0.0);
    cfg.n = 2000;
    cfg.default_rate = 0.10;
  } else if (name == "text_only") {
    fill(0.0, 1.5);
    cfg.n = 2000;
    cfg.default_rate = 0.10;
  } else {
    fail(Errc::InvalidConfig, "unknown preset '" + name + "'");
  }
  return cfg;
}

double truth_log_odds(double intercept, const RecordTruth& truth, const std::vector<Clause>& clause_table) {
  double z = intercept;
  for (const auto& [name, c] : truth.feature_contributions) z += c;
  for (std::size_t k : truth.clauses) z += clause_table.at(k).contribution;
  return z;
}

std::string rule_based_refine(const std::vector<Clause>& drawn) {
  std::string positive, negative;
  const auto append = [](std::string& section, const std::string& item) {
    if (!section.empty()) section += '\n';
    section += item;
  };
  for (const auto& c : drawn) {
    const std::string body = strip_period(c.text);
    if (c.contribution > 0.0)
      append(negative, "* " + body +
                           ", which may weaken the borrower’s repayment capacity. The bank should review this factor "
                           "carefully before setting the loan amount and interest rate.");
    else if (c.contribution < 0.0)
      append(positive, "* " + body + ", which supports the borrower’s ability to repay on time.");
    else
      append(positive, "* " + body + ".");
  }
  if (positive.empty()) positive = "* No specific factors supporting repayment were identified.";
  if (negative.empty()) negative = "* No obvious factors that could lead to default were identified.";
  return render_sections({positive, negative});
}

SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthOutput out;
  out.clause_table = cfg.risky_clauses;
  out.clause_table.insert(out.clause_table.end(), cfg.safe_clauses.begin(), cfg.safe_clauses.end());
  out.clause_table.insert(out.clause_table.end(), cfg.neutral_clauses.begin(), cfg.neutral_clauses.end());

  for (const auto& f : cfg.features) out.dataset.schema.push_back({f.name, f.kind});

  const std::size_t width = std::to_string(cfg.n).size();
  Rng rng(derive_seed(cfg.seed, {1}));
  std::vector<double> signal(cfg.n);
  out.dataset.records.resize(cfg.n);
  out.truth.resize(cfg.n);
  std::vector<std::size_t> pool(out.clause_table.size());

  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto& rec = out.dataset.records[i];
    auto& truth = out.truth[i];
    std::string id = std::to_string(i + 1);
    rec.id = "L" + std::string(width - id.size(), '0') + id;
    truth.id = rec.id;

    for (const auto& f : cfg.features) {
      const bool missing = rng.uniform() < cfg.missing_rate;
      double contribution = 0.0;
      if (f.kind == FeatureKind::Continuous) {
        const double z = rng.normal();
        if (missing) {
          rec.features[f.name] = Missing{};
        } else {
          rec.features[f.name] = f.mean + f.scale * z;
          contribution = f.strength * z;
        }
      } else {
        const auto level = static_cast<std::size_t>(rng.index(f.levels.size()));
        if (missing) {
          rec.features[f.name] = Missing{};
        } else {
          rec.features[f.name] = f.levels[level];
          contribution = f.strength * f.level_effects[level];
        }
      }
      truth.feature_contributions[f.name] = contribution;
    }

    const int count = cfg.clauses_min + static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.clauses_max - cfg.clauses_min + 1)));
    for (std::size_t k = 0; k < pool.size(); ++k) pool[k] = k;
    std::vector<Clause> drawn;
    for (int c = 0; c < count; ++c) {
      const auto j = static_cast<std::size_t>(c) + static_cast<std::size_t>(rng.index(pool.size() - static_cast<std::size_t>(c)));
      std::swap(pool[static_cast<std::size_t>(c)], pool[j]);
      truth.clauses.push_back(pool[static_cast<std::size_t>(c)]);
      drawn.push_back(out.clause_table[pool[static_cast<std::size_t>(c)]]);
    }
    for (std::size_t c = 0; c < drawn.size(); ++c) {
      if (c > 0) rec.human_text += ' ';
      rec.human_text += drawn[c].text;
    }
    if (cfg.refiner) {
      const std::string full = rule_based_refine(drawn);
      const Sections s = parse_sections(full);
      rec.refined_texts["full"] = full;
      for (const char* v : {"positive", "negative", "pos_neg", "neg_pos"}) rec.refined_texts[v] = compose_variant(s, v);
    }

    rec.loan_amount = std::round(rng.uniform(cfg.amount_min, cfg.amount_max) / 1000.0) * 1000.0;
    rec.interest_rate = std::round(rng.uniform(cfg.rate_min, cfg.rate_max) * 10000.0) / 10000.0;
    static constexpr int kTerms[] = {12, 24, 36};
    rec.term_months = kTerms[rng.index(3)];

    signal[i] = truth_log_odds(0.0, truth, out.clause_table);
  }

  // Intercept: mean sampling probability equals the target rate.
  const auto mean_prob = [&](double b) {
    double s = 0.0;
    for (double x : signal) s += logistic(b + x);
    return s / static_cast<double>(cfg.n);
  };
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_prob(mid) < cfg.default_rate ? lo : hi) = mid;
  }
  out.intercept = 0.5 * (lo + hi);
  const double achieved = mean_prob(out.intercept);
  if (!(std::abs(achieved - cfg.default_rate) <= cfg.calibration_tolerance))
    fail(Errc::CalibrationFailure, "mean probability " + std::to_string(achieved) + " vs target " +
                                       std::to_string(cfg.default_rate));

  Rng label_rng(derive_seed(cfg.seed, {2}));
  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto& truth = out.truth[i];
    truth.log_odds = truth_log_odds(out.intercept, truth, out.clause_table);
    truth.probability = logistic(truth.log_odds);
    out.dataset.records[i].label = label_rng.uniform() < truth.probability ? 1 : 0;
  }
  return out;
}

std::string truth_json(const SynthOutput& out) {
  nlohmann::ordered_json j;
  j["intercept"] = out.intercept;
  auto& table = j["clauses"] = nlohmann::ordered_json::array();
  for (const auto& c : out.clause_table) table.push_back({{"text", c.text}, {"contribution", c.contribution}});
  auto& records = j["records"] = nlohmann::ordered_json::array();
  for (const auto& t : out.truth) {
    nlohmann::ordered_json r;
    r["id"] = t.id;
    r["feature_contributions"] = t.feature_contributions;
    r["clauses"] = t.clauses;
    r["log_odds"] = t.log_odds;
    r["probability"] = t.probability;
    records.push_back(std::move(r));
  }
  return j.dump(1) + "\n";
}

void save_synth(const std::filesystem::path& dir, const SynthOutput& out) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::Io, "cannot create " + dir.string());
  save_dataset(dir / "dataset.jsonl", out.dataset);
  save_schema(dir / "schema.json", out.dataset.schema);
  std::ofstream f(dir / "truth.json", std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::Io, "cannot write " + (dir / "truth.json").string());
  f << truth_json(out);
}

namespace {

std::string format_vector(const Eigen::VectorXd& v) {
  std::string s;
  char buf[32];
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    std::snprintf(buf, sizeof buf, k == 0 ? "%.9g" : " %.9g", v(k));
    s += buf;
  }
  return s;
}

}  // namespace

void write_word_vectors(const std::filesystem::path& path, const SynthOutput& out, int dim, std::uint64_t seed) {
  if (dim < 1) fail(Errc::InvalidConfig, "dim must be >= 1");
  const Tokenizer tok{TokenMode::Word};
  std::map<std::string, int> lean;  // +1 risky only, -1 safe only, 0 mixed or neutral
  std::set<std::string> vocab;
  for (const auto& c : out.clause_table) {
    const int sign = c.contribution > 0 ? 1 : (c.contribution < 0 ? -1 : 0);
    for (const auto& w : tok(c.text)) {
      auto [it, fresh] = lean.emplace(w, sign);
      if (!fresh && it->second != sign) it->second = 0;
      vocab.insert(w);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::Io, "cannot write " + path.string());
  f << vocab.size() << ' ' << dim << '\n';
  Rng rng(derive_seed(seed, {3}));
  for (const auto& w : vocab) {
    Eigen::VectorXd v(dim);
    for (int k = 0; k < dim; ++k) v(k) = 0.3 * rng.normal();
    v(0) += lean[w];
    f << w << ' ' << format_vector(v) << '\n';
  }
}

void write_doc_vectors(const std::filesystem::path& path, const SynthOutput& out, int dim, std::uint64_t seed) {
  if (dim < 1) fail(Errc::InvalidConfig, "dim must be >= 1");
  Rng rng(derive_seed(seed, {4}));
  std::vector<Eigen::VectorXd> clause_vec;
  for (const auto& c : out.clause_table) {
    Eigen::VectorXd v(dim);
    for (int k = 0; k < dim; ++k) v(k) = 0.5 * rng.normal();
    v(0) += c.contribution;
    clause_vec.push_back(std::move(v));
  }
  FeatureBlock block;
  block.source = "docvec:synthetic";
  block.values.resize(static_cast<Eigen::Index>(out.truth.size()), dim);
  for (std::size_t i = 0; i < out.truth.size(); ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    for (std::size_t k : out.truth[i].clauses) v += clause_vec[k];
    v /= static_cast<double>(std::max<std::size_t>(out.truth[i].clauses.size(), 1));
    for (int k = 0; k < dim; ++k) v(k) += 0.3 * rng.normal();
    block.ids.push_back(out.truth[i].id);
    block.values.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  save_doc_vectors(path, block);
}

}  // namespace credtext
