#include "credtext/refine.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "credtext/error.hpp"
#include "credtext/hash.hpp"
#include "credtext/rng.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("refine", code, detail); }

std::string trim(const std::string& s) {
  const auto is_ws = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_ws(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_ws(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string build_prompt(const std::string& human_text) {
  if (trim(human_text).empty()) fail(Errc::EmptyText, "human text is empty");
  std::string out = kPromptGreeting;
  out += ' ';
  out += human_text;
  out += ' ';
  out += kPromptInstruction;
  return out;
}

void EndpointConfig::validate() const {
  if (base_url.empty()) fail(Errc::InvalidConfig, "base_url is empty");
  if (model.empty()) fail(Errc::InvalidConfig, "model is empty");
  if (max_retries < 0) fail(Errc::InvalidConfig, "max_retries must be >= 0");
  if (rpm_cap < 1) fail(Errc::InvalidConfig, "rpm_cap must be >= 1");
  if (max_in_flight < 1 || max_in_flight > 1024) fail(Errc::InvalidConfig, "max_in_flight must be in [1, 1024]");
  if (!(timeout_seconds > 0.0)) fail(Errc::InvalidConfig, "timeout must be positive");
  if (!(backoff_base_seconds >= 0.0)) fail(Errc::InvalidConfig, "backoff base must be >= 0");
}

double SystemClock::now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_for(double seconds) {
  if (seconds > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

double FakeClock::now() {
  std::lock_guard lock(mutex_);
  return now_;
}

void FakeClock::sleep_for(double seconds) {
  std::lock_guard lock(mutex_);
  if (seconds > 0.0) now_ += seconds;
}

RateLimiter::RateLimiter(int cap, Clock& clock, double window_seconds)
    : cap_(cap), clock_(clock), window_(window_seconds) {
  if (cap < 1) fail(Errc::InvalidConfig, "rpm cap must be >= 1");
}

double RateLimiter::acquire() {
  std::lock_guard lock(mutex_);
  for (;;) {
    const double now = clock_.now();
    while (!issued_.empty() && issued_.front() + window_ <= now) issued_.pop_front();
    if (static_cast<int>(issued_.size()) < cap_) {
      issued_.push_back(now);
      return now;
    }
    clock_.sleep_for(issued_.front() + window_ - now);
  }
}

LlmClient::LlmClient(EndpointConfig cfg, std::shared_ptr<Clock> clock, RetryLog log)
    : cfg_((cfg.validate(), std::move(cfg))),
      clock_(std::move(clock)),
      log_(std::move(log)),
      limiter_(cfg_.rpm_cap, *clock_),
      in_flight_(cfg_.max_in_flight),
      jitter_state_(cfg_.jitter_seed) {}

double LlmClient::backoff_delay(int attempt) {
  double jitter;
  {
    std::lock_guard lock(jitter_mutex_);
    jitter_state_ = splitmix64(jitter_state_);
    jitter = static_cast<double>(jitter_state_ >> 11) * 0x1.0p-53;
  }
  return cfg_.backoff_base_seconds * std::ldexp(1.0, attempt) * (1.0 + jitter);
}

std::string LlmClient::call(const std::string& prompt) {
  const char* token = std::getenv(cfg_.api_key_env.c_str());
  if (token == nullptr || *token == '\0') fail(Errc::AuthMissing, "environment variable " + cfg_.api_key_env + " is not set");

  std::string origin = cfg_.base_url;
  std::string prefix;
  const auto scheme_end = origin.find("://");
  const auto path_start = origin.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start != std::string::npos) {
    prefix = origin.substr(path_start);
    origin.resize(path_start);
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const std::string path = prefix + "/chat/completions";

  nlohmann::json body = {{"model", cfg_.model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                         {"temperature", cfg_.temperature}};
  const std::string payload = body.dump();

  httplib::Client http(origin);
  const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  http.set_connection_timeout(secs, usecs);
  http.set_read_timeout(secs, usecs);
  http.set_write_timeout(secs, usecs);
  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + token}};

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  for (int attempt = 0;; ++attempt) {
    limiter_.acquire();
    ++requests_;
    auto res = http.Post(path, headers, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
        fail(Errc::Timeout, "no response within " + std::to_string(cfg_.timeout_seconds) + " s");
      fail(Errc::HttpError, "status 0: " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status >= 200 && status < 300) {
      nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) fail(Errc::MalformedResponse, "response is not JSON");
      try {
        const auto& content = parsed.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) fail(Errc::MalformedResponse, "message content is not a string");
        return content.get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        fail(Errc::MalformedResponse, e.what());
      }
    }
    const bool retryable = status == 429 || status >= 500;
    if (!retryable) fail(Errc::HttpError, "status " + std::to_string(status));
    if (attempt >= cfg_.max_retries) {
      if (status == 429) fail(Errc::RateLimitedExhausted, "429 after " + std::to_string(attempt) + " retries");
      fail(Errc::HttpError, "status " + std::to_string(status) + " after " + std::to_string(attempt) + " retries");
    }
    const double delay = backoff_delay(attempt);
    ++retries_;
    if (log_) {
      std::ostringstream line;
      line << "retry " << (attempt + 1) << " status " << status << " delay " << delay;
      log_(line.str());
    }
    clock_->sleep_for(delay);
  }
}

std::string call_llm(const EndpointConfig& cfg, const std::string& prompt) {
  LlmClient client(cfg);
  return client.call(prompt);
}

namespace {

const std::regex& header_positive() {
  static const std::regex re(R"(1\.\s*factors\s+supporting\s+the\s+borrower(?:'|’)s\s+repayment\s*:)",
                             std::regex::ECMAScript | std::regex::icase);
  return re;
}

const std::regex& header_negative() {
  static const std::regex re(
      R"(2\.\s*factors\s+that\s+could\s+(?:potentially\s+)?lead\s+to\s+the\s+borrower(?:'|’)s\s+default\s*:)",
      std::regex::ECMAScript | std::regex::icase);
  return re;
}

}  // namespace

Sections parse_sections(const std::string& raw) {
  std::smatch h1;
  if (!std::regex_search(raw, h1, header_positive())) fail(Errc::FormatMismatch, "repayment header not found");
  const auto after_h1 = raw.begin() + h1.position(0) + h1.length(0);
  std::smatch h2;
  if (!std::regex_search(after_h1, raw.end(), h2, header_negative()))
    fail(Errc::FormatMismatch, "default header not found after the repayment header");
  Sections s;
  s.positive = trim(std::string(after_h1, after_h1 + h2.position(0)));
  s.negative = trim(std::string(after_h1 + h2.position(0) + h2.length(0), raw.end()));
  // the answer template separates the parts with ';'
  if (!s.positive.empty() && s.positive.back() == ';') s.positive = trim(s.positive.substr(0, s.positive.size() - 1));
  if (s.positive.empty() || s.negative.empty()) fail(Errc::FormatMismatch, "empty section");
  return s;
}

std::string compose_variant(const Sections& sections, const std::string& variant) {
  const auto need = [&](const std::string& text, const char* which) {
    if (text.empty()) fail(Errc::MissingSection, std::string(which) + " section is empty");
  };
  if (variant == "positive") {
    need(sections.positive, "positive");
    return sections.positive;
  }
  if (variant == "negative") {
    need(sections.negative, "negative");
    return sections.negative;
  }
  if (variant == "pos_neg" || variant == "neg_pos") {
    need(sections.positive, "positive");
    need(sections.negative, "negative");
    return variant == "pos_neg" ? sections.positive + "\n\n" + sections.negative
                                : sections.negative + "\n\n" + sections.positive;
  }
  fail(Errc::InvalidConfig, "unknown variant '" + variant + "'");
}

std::string render_sections(const Sections& sections) {
  return "1. Factors supporting the borrower’s repayment: " + sections.positive +
         "\n2. Factors that could lead to the borrower’s default: " + sections.negative;
}

std::string cache_key(const std::string& prompt, const std::string& model) {
  std::string material = model;
  material.push_back('\0');
  material += prompt;
  return sha256_hex(material);
}

namespace {

std::mutex& key_mutex(const std::string& key) {
  static std::mutex registry_mutex;
  static std::map<std::string, std::unique_ptr<std::mutex>> registry;
  std::lock_guard lock(registry_mutex);
  auto& slot = registry[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string entry_checksum(const nlohmann::ordered_json& entry) {
  nlohmann::ordered_json copy = entry;
  copy.erase("checksum");
  return sha256_hex(copy.dump());
}

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<nlohmann::ordered_json> read_entry(const std::filesystem::path& file, const std::string& key,
                                                 const std::string& model, const WarningSink& warn) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  auto entry = nlohmann::ordered_json::parse(buf.str(), nullptr, false);
  const auto corrupt = [&](const std::string& why) {
    const Error e("refine", Errc::CacheCorrupt, file.string() + ": " + why);
    if (warn) warn(e.what());
    return std::nullopt;
  };
  if (entry.is_discarded() || !entry.is_object()) return corrupt("not a JSON object");
  for (const char* field : {"prompt_hash", "model", "raw", "positive", "negative", "timestamp", "checksum"})
    if (!entry.contains(field) || !entry[field].is_string()) return corrupt(std::string("field '") + field + "'");
  if (entry["checksum"].get<std::string>() != entry_checksum(entry)) return corrupt("checksum mismatch");
  if (entry["prompt_hash"] != key || entry["model"] != model) return corrupt("key mismatch");
  return entry;
}

}  // namespace

RefineResult cached_refine(const std::filesystem::path& cache_dir, LlmClient& client, const LoanRecord& record,
                           const WarningSink& warn) {
  const std::string prompt = build_prompt(record.human_text);
  const std::string& model = client.config().model;
  const std::string key = cache_key(prompt, model);
  const auto file = cache_dir / (key + ".json");

  std::lock_guard lock(key_mutex(file.string()));
  RefineResult result;
  result.id = record.id;
  result.model = model;

  if (auto entry = read_entry(file, key, model, warn)) {
    result.raw = (*entry)["raw"].get<std::string>();
    result.positive = (*entry)["positive"].get<std::string>();
    result.negative = (*entry)["negative"].get<std::string>();
    result.retrieved_from_cache = true;
    if (result.positive.empty() || result.negative.empty()) {
      const Sections s = parse_sections(result.raw);  // cached unparseable answer: raises again
      result.positive = s.positive;
      result.negative = s.negative;
    }
    return result;
  }

  result.raw = client.call(prompt);
  std::optional<Error> parse_error;
  try {
    const Sections s = parse_sections(result.raw);
    result.positive = s.positive;
    result.negative = s.negative;
  } catch (const Error& e) {
    parse_error = e;
  }

  nlohmann::ordered_json entry;
  entry["prompt_hash"] = key;
  entry["model"] = model;
  entry["raw"] = result.raw;
  entry["positive"] = result.positive;
  entry["negative"] = result.negative;
  entry["timestamp"] = utc_timestamp();
  entry["checksum"] = entry_checksum(entry);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::Io, "cannot write " + tmp);
    out << entry.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, file, ec);
  if (ec) fail(Errc::Io, "cannot write " + file.string() + ": " + ec.message());

  if (parse_error) throw *parse_error;
  return result;
}

RefineSummary refine_dataset(Dataset& dataset, const std::filesystem::path& cache_dir, LlmClient& client, int workers,
                             const WarningSink& warn) {
  const std::size_t n = dataset.records.size();
  std::vector<std::optional<RefineResult>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<bool> mismatched(n, false);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = cached_refine(cache_dir, client, dataset.records[i], warn);
      } catch (const Error& e) {
        if (e.code() == Errc::FormatMismatch)
          mismatched[i] = true;
        else
          errors[i] = std::current_exception();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int threads = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
    for (int t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  RefineSummary summary;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    auto& rec = dataset.records[i];
    if (mismatched[i]) {
      summary.format_mismatches.push_back(rec.id);
      continue;
    }
    const auto& r = *results[i];
    const Sections s{r.positive, r.negative};
    rec.refined_texts["full"] = trim(r.raw);
    for (const char* v : {"positive", "negative", "pos_neg", "neg_pos"}) rec.refined_texts[v] = compose_variant(s, v);
    ++summary.refined;
    if (r.retrieved_from_cache) ++summary.from_cache;
  }
  return summary;
}

}  // namespace credtext
