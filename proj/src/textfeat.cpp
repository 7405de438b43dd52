#include "credtext/textfeat.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "credtext/error.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("textfeat", code, detail); }

bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

TfidfModel fit_tfidf(std::span<const TokenList> corpus) {
  if (corpus.empty()) fail(Errc::EmptyCorpus, "TF-IDF needs at least one training document");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::set<std::string> unique(doc.begin(), doc.end());
    for (const auto& t : unique) ++df[t];
  }
  TfidfModel model;
  model.doc_count = corpus.size();
  model.idf.resize(static_cast<Eigen::Index>(df.size()));
  int col = 0;
  const double n = static_cast<double>(corpus.size());
  for (const auto& [token, count] : df) {
    model.vocabulary.emplace(token, col);
    model.idf(col) = std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0;
    ++col;
  }
  return model;
}

Eigen::SparseVector<double> transform(const TfidfModel& model, const TokenList& tokens) {
  std::map<int, double> counts;
  for (const auto& t : tokens) {
    auto it = model.vocabulary.find(t);
    if (it != model.vocabulary.end()) counts[it->second] += 1.0;
  }
  Eigen::SparseVector<double> v(model.size());
  v.reserve(static_cast<Eigen::Index>(counts.size()));
  double sq = 0.0;
  for (const auto& [col, tf] : counts) {
    const double w = tf * model.idf(col);
    sq += w * w;
  }
  const double norm = std::sqrt(sq);
  for (const auto& [col, tf] : counts) v.insertBack(col) = tf * model.idf(col) / norm;
  return v;
}

FeatureBlock tfidf_features(const TfidfModel& model, std::span<const TokenList> docs,
                            const std::vector<std::string>& ids) {
  FeatureBlock block;
  block.source = "tfidf";
  block.ids = ids;
  block.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(docs.size()), model.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto v = transform(model, docs[i]);
    for (Eigen::SparseVector<double>::InnerIterator it(v); it; ++it)
      block.values(static_cast<Eigen::Index>(i), it.index()) = it.value();
  }
  return block;
}

void WordVectors::add(const std::string& word, const Eigen::VectorXd& v) {
  if (v.size() != dim_) fail(Errc::DimMismatch, "vector for '" + word + "' has dimension " + std::to_string(v.size()));
  auto [it, inserted] = index_.emplace(word, vectors_.size());
  if (inserted) {
    vectors_.push_back(v);
  } else {
    vectors_[it->second] = v;
  }
}

const Eigen::VectorXd* WordVectors::find(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

WordVectors load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, path.string());
  std::string line;
  if (!std::getline(in, line)) fail(Errc::MalformedLine, "line 1: missing '<count> <dim>' header");
  const auto header = split_spaces(line);
  double count_d = 0, dim_d = 0;
  if (header.size() != 2 || !parse_double(header[0], count_d) || !parse_double(header[1], dim_d) || dim_d < 1)
    fail(Errc::MalformedLine, "line 1: expected '<count> <dim>'");
  const int dim = static_cast<int>(dim_d);
  WordVectors table(dim);
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto parts = split_spaces(line);
    if (parts.empty()) continue;
    if (static_cast<int>(parts.size()) - 1 != dim)
      fail(Errc::DimMismatch, "line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                                  " values, found " + std::to_string(parts.size() - 1));
    Eigen::VectorXd v(dim);
    for (int k = 0; k < dim; ++k) {
      if (!parse_double(parts[static_cast<std::size_t>(k) + 1], v(k)) || !std::isfinite(v(k)))
        fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": bad value");
    }
    table.add(std::string(parts[0]), v);
    ++rows;
  }
  if (rows != static_cast<std::size_t>(count_d))
    fail(Errc::MalformedLine, "header announces " + std::to_string(static_cast<std::size_t>(count_d)) +
                                  " vectors, file holds " + std::to_string(rows));
  return table;
}

Eigen::VectorXd avg_embed(const WordVectors& table, const TokenList& tokens) {
  // Summing per distinct word in word order makes the result exactly
  // independent of token order.
  std::map<std::string, int> counts;
  for (const auto& t : tokens)
    if (table.find(t) != nullptr) ++counts[t];
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(table.dim());
  int n = 0;
  for (const auto& [word, c] : counts) {
    sum += static_cast<double>(c) * *table.find(word);
    n += c;
  }
  if (n > 0) sum /= static_cast<double>(n);
  return sum;
}

FeatureBlock wordvec_features(const WordVectors& table, std::span<const TokenList> docs,
                              const std::vector<std::string>& ids) {
  FeatureBlock block;
  block.source = "wordvec";
  block.ids = ids;
  block.values.resize(static_cast<Eigen::Index>(docs.size()), table.dim());
  for (std::size_t i = 0; i < docs.size(); ++i)
    block.values.row(static_cast<Eigen::Index>(i)) = avg_embed(table, docs[i]).transpose();
  return block;
}

std::map<std::string, Eigen::VectorXd> load_doc_vectors(const std::filesystem::path& path, int expected_dim,
                                                         const std::vector<std::string>& requested_ids) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, path.string());
  std::map<std::string, Eigen::VectorXd> all;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": no tab after id");
    const std::string id = line.substr(0, tab);
    const auto parts = split_spaces(std::string_view(line).substr(tab + 1));
    if (static_cast<int>(parts.size()) != expected_dim)
      fail(Errc::DimMismatch, "id " + id + ": expected " + std::to_string(expected_dim) + " values, found " +
                                  std::to_string(parts.size()));
    Eigen::VectorXd v(expected_dim);
    for (int k = 0; k < expected_dim; ++k) {
      const auto tok = parts[static_cast<std::size_t>(k)];
      if (!parse_double(tok, v(k))) {
        // from_chars rejects "inf"/"nan" spellings on some libraries; treat them as non-finite
        std::string lower(tok);
        for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lower.find("nan") != std::string::npos || lower.find("inf") != std::string::npos)
          fail(Errc::NonFiniteValue, "id " + id);
        fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": bad value '" + std::string(tok) + "'");
      }
      if (!std::isfinite(v(k))) fail(Errc::NonFiniteValue, "id " + id);
    }
    all[id] = std::move(v);
  }
  std::map<std::string, Eigen::VectorXd> out;
  std::string missing;
  for (const auto& id : requested_ids) {
    auto it = all.find(id);
    if (it == all.end()) {
      missing += missing.empty() ? id : ", " + id;
      continue;
    }
    out.emplace(id, it->second);
  }
  if (!missing.empty()) fail(Errc::MissingId, missing);
  return out;
}

void save_doc_vectors(const std::filesystem::path& path, const FeatureBlock& block) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("textfeat", Errc::Io, "cannot write " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < block.ids.size(); ++i) {
    out << block.ids[i] << '\t';
    for (Eigen::Index k = 0; k < block.dim(); ++k) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, block.values(static_cast<Eigen::Index>(i), k));
      (void)ec;
      if (k > 0) out << ' ';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

FeatureBlock docvec_features(const std::string& name, const std::map<std::string, Eigen::VectorXd>& table,
                             const std::vector<std::string>& ids) {
  FeatureBlock block;
  block.source = "docvec:" + name;
  block.ids = ids;
  Eigen::Index dim = table.empty() ? 0 : table.begin()->second.size();
  block.values.resize(static_cast<Eigen::Index>(ids.size()), dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = table.find(ids[i]);
    if (it == table.end()) fail(Errc::MissingId, ids[i]);
    block.values.row(static_cast<Eigen::Index>(i)) = it->second.transpose();
  }
  return block;
}

std::vector<bool> truncation_flags(std::span<const TokenList> docs, std::size_t max_tokens) {
  std::vector<bool> flags;
  flags.reserve(docs.size());
  for (const auto& d : docs) flags.push_back(d.size() > max_tokens);
  return flags;
}

}  // namespace credtext
