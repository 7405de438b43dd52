#include "credtext/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "credtext/error.hpp"
#include "credtext/rng.hpp"

namespace credtext {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("corpus", code, detail); }

std::string at_line(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

// Removes representation noise such as 2400 * 0.3 = 720.0000000000001.
double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

// Hamilton apportionment of `total` seats over `quota`; ties on the
// fractional part go to the smaller stratum, then to the higher label.
std::vector<std::size_t> apportion(const std::vector<double>& quota, std::size_t total,
                                   const std::vector<std::size_t>& stratum_size,
                                   const std::vector<std::size_t>& capacity) {
  std::vector<std::size_t> seats(quota.size());
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < quota.size(); ++s) {
    seats[s] = std::min(static_cast<std::size_t>(std::floor(snap(quota[s]))), capacity[s]);
    assigned += seats[s];
  }
  std::vector<std::size_t> order(quota.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = snap(quota[a]) - std::floor(snap(quota[a]));
    const double rb = snap(quota[b]) - std::floor(snap(quota[b]));
    if (ra != rb) return ra > rb;
    if (stratum_size[a] != stratum_size[b]) return stratum_size[a] < stratum_size[b];
    return a > b;
  });
  while (assigned < total) {
    bool progressed = false;
    for (std::size_t s : order) {
      if (assigned == total) break;
      if (seats[s] < capacity[s]) {
        ++seats[s];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  while (assigned > total) {
    for (auto it = order.rbegin(); it != order.rend() && assigned > total; ++it) {
      if (seats[*it] > 0) {
        --seats[*it];
        --assigned;
      }
    }
  }
  return seats;
}

// Moves one seat into every empty stratum that can spare a record, taking it
// from the stratum holding the most seats.
void ensure_each_label(std::vector<std::size_t>& seats, const std::vector<std::size_t>& available) {
  const std::size_t total = std::accumulate(seats.begin(), seats.end(), std::size_t{0});
  if (total < seats.size()) return;
  for (std::size_t s = 0; s < seats.size(); ++s) {
    if (seats[s] > 0 || available[s] < 2) continue;
    const auto donor = std::max_element(seats.begin(), seats.end()) - seats.begin();
    if (seats[donor] < 2) continue;
    --seats[donor];
    ++seats[s];
  }
}

FeatureValue parse_feature(const ojson& v, const FeatureSpec& spec, std::size_t line_no) {
  if (v.is_null()) return Missing{};
  if (v.is_string() && v.get<std::string>().empty()) return Missing{};
  if (spec.kind == FeatureKind::Continuous) {
    if (!v.is_number())
      fail(Errc::SchemaMismatch, at_line(line_no) + "feature '" + spec.name + "' is not numeric");
    const double x = v.get<double>();
    if (!std::isfinite(x))
      fail(Errc::SchemaMismatch, at_line(line_no) + "feature '" + spec.name + "' is not finite");
    return x;
  }
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
  fail(Errc::SchemaMismatch, at_line(line_no) + "feature '" + spec.name + "' is not categorical");
}

}  // namespace

bool is_refined_tag(const std::string& tag) {
  return std::any_of(std::begin(kRefinedTags), std::end(kRefinedTags), [&](const char* t) { return tag == t; });
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.id);
  return out;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, path.string());
  ojson doc;
  try {
    doc = ojson::parse(in);
  } catch (const std::exception& e) {
    fail(Errc::SchemaMismatch, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) fail(Errc::SchemaMismatch, path.string() + ": schema must be a JSON array");
  Schema schema;
  std::set<std::string> seen;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("name") || !item.contains("kind"))
      fail(Errc::SchemaMismatch, "schema entries need 'name' and 'kind'");
    FeatureSpec spec;
    spec.name = item.at("name").get<std::string>();
    const auto kind = item.at("kind").get<std::string>();
    if (kind == "continuous") {
      spec.kind = FeatureKind::Continuous;
    } else if (kind == "categorical") {
      spec.kind = FeatureKind::Categorical;
    } else {
      fail(Errc::SchemaMismatch, "unknown feature kind '" + kind + "'");
    }
    if (!seen.insert(spec.name).second) fail(Errc::SchemaMismatch, "duplicate schema feature '" + spec.name + "'");
    schema.push_back(std::move(spec));
  }
  return schema;
}

void save_schema(const std::filesystem::path& path, const Schema& schema) {
  ojson doc = ojson::array();
  for (const auto& f : schema)
    doc.push_back({{"name", f.name}, {"kind", f.kind == FeatureKind::Continuous ? "continuous" : "categorical"}});
  std::ofstream out(path);
  if (!out) throw Error("corpus", Errc::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

LoanRecord parse_record(const std::string& line, const Schema& schema, std::size_t line_no) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const std::exception& e) {
    fail(Errc::SchemaMismatch, at_line(line_no) + "invalid JSON: " + e.what());
  }
  if (!j.is_object()) fail(Errc::SchemaMismatch, at_line(line_no) + "record is not an object");

  static const std::set<std::string> known = {"id", "label", "loan_amount", "interest_rate", "term_months",
                                              "features", "human_text", "refined_texts"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) fail(Errc::SchemaMismatch, at_line(line_no) + "unknown field '" + key + "'");
  for (const char* key : {"id", "label", "loan_amount", "interest_rate", "term_months", "features", "human_text"})
    if (!j.contains(key)) fail(Errc::SchemaMismatch, at_line(line_no) + "missing field '" + key + "'");

  LoanRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    const auto& label = j.at("label");
    if (!label.is_number_integer() || (label.get<long long>() != 0 && label.get<long long>() != 1))
      fail(Errc::InvalidLabel, at_line(line_no) + "label must be 0 or 1 (id " + r.id + ")");
    r.label = static_cast<int>(label.get<long long>());
    r.loan_amount = j.at("loan_amount").get<double>();
    r.interest_rate = j.at("interest_rate").get<double>();
    r.term_months = j.at("term_months").get<int>();
    r.human_text = j.at("human_text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaMismatch, at_line(line_no) + e.what());
  }
  if (!(r.loan_amount > 0.0)) fail(Errc::SchemaMismatch, at_line(line_no) + "loan_amount must be > 0");
  if (!(r.interest_rate >= 0.0)) fail(Errc::SchemaMismatch, at_line(line_no) + "interest_rate must be >= 0");
  if (r.term_months <= 0) fail(Errc::SchemaMismatch, at_line(line_no) + "term_months must be positive");

  const auto& feats = j.at("features");
  if (!feats.is_object()) fail(Errc::SchemaMismatch, at_line(line_no) + "features must be an object");
  for (const auto& spec : schema) {
    if (!feats.contains(spec.name))
      fail(Errc::SchemaMismatch, at_line(line_no) + "record lacks feature '" + spec.name + "'");
    r.features.emplace(spec.name, parse_feature(feats.at(spec.name), spec, line_no));
  }
  if (feats.size() != schema.size()) {
    for (const auto& [key, _] : feats.items()) {
      const bool in_schema =
          std::any_of(schema.begin(), schema.end(), [&](const FeatureSpec& s) { return s.name == key; });
      if (!in_schema) fail(Errc::SchemaMismatch, at_line(line_no) + "extra feature '" + key + "'");
    }
  }

  if (j.contains("refined_texts")) {
    const auto& refined = j.at("refined_texts");
    if (!refined.is_object()) fail(Errc::SchemaMismatch, at_line(line_no) + "refined_texts must be an object");
    for (const auto& [tag, text] : refined.items()) {
      if (!is_refined_tag(tag)) fail(Errc::SchemaMismatch, at_line(line_no) + "unknown refined tag '" + tag + "'");
      if (!text.is_string()) fail(Errc::SchemaMismatch, at_line(line_no) + "refined text must be a string");
      r.refined_texts.emplace(tag, text.get<std::string>());
    }
  }
  return r;
}

std::string format_record(const LoanRecord& r, const Schema& schema) {
  ojson j;
  j["id"] = r.id;
  j["label"] = r.label;
  j["loan_amount"] = r.loan_amount;
  j["interest_rate"] = r.interest_rate;
  j["term_months"] = r.term_months;
  ojson feats = ojson::object();
  for (const auto& spec : schema) {
    const auto& v = r.features.at(spec.name);
    if (const auto* d = std::get_if<double>(&v)) {
      feats[spec.name] = *d;
    } else if (const auto* s = std::get_if<std::string>(&v)) {
      feats[spec.name] = *s;
    } else {
      feats[spec.name] = nullptr;
    }
  }
  j["features"] = std::move(feats);
  j["human_text"] = r.human_text;
  ojson refined = ojson::object();
  for (const char* tag : kRefinedTags) {
    auto it = r.refined_texts.find(tag);
    if (it != r.refined_texts.end()) refined[tag] = it->second;
  }
  j["refined_texts"] = std::move(refined);
  return j.dump();
}

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, path.string());
  Dataset ds;
  ds.schema = schema;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    LoanRecord r = parse_record(line, schema, line_no);
    if (!ids.insert(r.id).second) fail(Errc::DuplicateId, at_line(line_no) + "duplicate id \"" + r.id + "\"");
    ds.records.push_back(std::move(r));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("corpus", Errc::Io, "cannot write " + path.string());
  for (const auto& r : dataset.records) out << format_record(r, dataset.schema) << '\n';
}

SplitIndices stratified_split(const Dataset& dataset, const SplitOptions& opt) {
  if (!(opt.train_frac > 0.0 && opt.train_frac < 1.0))
    fail(Errc::DegenerateSplit, "train_frac must lie in (0, 1)");
  if (!(opt.val_frac_of_train >= 0.0 && opt.val_frac_of_train < 1.0))
    fail(Errc::DegenerateSplit, "val_frac_of_train must lie in [0, 1)");

  std::vector<std::vector<std::size_t>> strata(2);
  for (std::size_t i = 0; i < dataset.records.size(); ++i) strata[dataset.records[i].label].push_back(i);
  if (strata[0].empty() || strata[1].empty()) fail(Errc::DegenerateSplit, "both labels must be present");

  const std::size_t n = dataset.records.size();
  const double test_frac = 1.0 - opt.train_frac;
  const std::vector<std::size_t> sizes = {strata[0].size(), strata[1].size()};

  std::vector<double> test_quota(2);
  for (int s = 0; s < 2; ++s) test_quota[s] = static_cast<double>(sizes[s]) * test_frac;
  const auto test_total = static_cast<std::size_t>(std::llround(snap(static_cast<double>(n) * test_frac)));
  auto test_seats = apportion(test_quota, test_total, sizes, sizes);
  ensure_each_label(test_seats, sizes);

  std::vector<std::size_t> pool = {sizes[0] - test_seats[0], sizes[1] - test_seats[1]};
  const std::size_t pool_total = pool[0] + pool[1];
  const auto val_total =
      static_cast<std::size_t>(std::ceil(snap(opt.val_frac_of_train * static_cast<double>(pool_total))));
  std::vector<double> val_quota(2);
  for (int s = 0; s < 2; ++s) val_quota[s] = opt.val_frac_of_train * static_cast<double>(pool[s]);
  auto val_seats = apportion(val_quota, val_total, sizes, pool);
  ensure_each_label(val_seats, pool);

  Rng rng(opt.seed);
  SplitIndices split;
  split.seed = opt.seed;
  for (int s = 0; s < 2; ++s) {
    auto members = strata[s];
    rng.shuffle(std::span<std::size_t>(members));
    std::size_t pos = 0;
    for (std::size_t k = 0; k < test_seats[s]; ++k) split.test.push_back(members[pos++]);
    for (std::size_t k = 0; k < val_seats[s]; ++k) split.val.push_back(members[pos++]);
    while (pos < members.size()) split.train.push_back(members[pos++]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());

  if (split.train.empty() || split.test.empty()) fail(Errc::DegenerateSplit, "train or test set is empty");
  if (opt.require_val && split.val.empty()) fail(Errc::DegenerateSplit, "validation set is empty");
  const auto first = dataset.records[split.train.front()].label;
  const bool single = std::all_of(split.train.begin(), split.train.end(),
                                  [&](std::size_t i) { return dataset.records[i].label == first; });
  if (single) fail(Errc::DegenerateSplit, "training set holds a single class");
  return split;
}

const std::string* select_text(const LoanRecord& record, const std::string& text_selector) {
  if (text_selector == "human") return &record.human_text;
  auto it = record.refined_texts.find(text_selector);
  return it == record.refined_texts.end() ? nullptr : &it->second;
}

std::map<int, LengthStats> text_length_stats(const Dataset& dataset, const std::string& text_selector,
                                             const Tokenizer& tokenizer) {
  // Integer moments keep the result independent of record order.
  struct Moments {
    std::int64_t n = 0, sum = 0, sumsq = 0;
  };
  std::map<int, Moments> acc;
  for (const auto& r : dataset.records) {
    const std::string* text = select_text(r, text_selector);
    if (text == nullptr) fail(Errc::MissingText, "record " + r.id + " has no '" + text_selector + "' text");
    const auto len = static_cast<std::int64_t>(tokenizer(*text).size());
    auto& m = acc[r.label];
    ++m.n;
    m.sum += len;
    m.sumsq += len * len;
  }
  std::map<int, LengthStats> out;
  for (const auto& [label, m] : acc) {
    LengthStats s;
    s.count = static_cast<std::size_t>(m.n);
    s.mean = static_cast<double>(m.sum) / static_cast<double>(m.n);
    if (m.n > 1) {
      const double num = static_cast<double>(m.n * m.sumsq - m.sum * m.sum);
      s.sd = std::sqrt(num / static_cast<double>(m.n * (m.n - 1)));
    }
    out.emplace(label, s);
  }
  return out;
}

}  // namespace credtext
