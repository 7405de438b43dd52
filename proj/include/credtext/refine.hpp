#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "credtext/corpus.hpp"

namespace credtext {

inline constexpr const char* kPromptGreeting = "Hi ChatGPT, there is a bank loan borrower whose details are below.";
inline constexpr const char* kPromptInstruction =
    "The bank plans to lend to this borrower. Based on the above information, please carefully summarise and "
    "analyse the factors that support the borrower’s ability to repay the loan on time and the factors that "
    "could lead to the borrower’s default. The expected answer template consists of two parts: 1. Factors "
    "supporting the borrower’s repayment: [Insert answer here]; 2. Factors that could potentially lead to the "
    "borrower’s default: [Insert answer here].";

/// greeting + " " + text + " " + instruction. Leading and trailing
/// whitespace of `human_text` is not touched.
std::string build_prompt(const std::string& human_text);

struct EndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  double timeout_seconds = 60.0;
  int max_retries = 5;
  int rpm_cap = 60;
  std::string api_key_env = "REFINE_API_KEY";
  int max_in_flight = 2;
  double backoff_base_seconds = 1.0;
  std::uint64_t jitter_seed = 0;

  void validate() const;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;  // seconds
  virtual void sleep_for(double seconds) = 0;
};

class SystemClock final : public Clock {
 public:
  double now() override;
  void sleep_for(double seconds) override;
};

/// Sleeping advances time instantly. Thread-safe.
class FakeClock final : public Clock {
 public:
  explicit FakeClock(double start = 0.0) : now_(start) {}
  double now() override;
  void sleep_for(double seconds) override;
  void advance(double seconds) { sleep_for(seconds); }

 private:
  std::mutex mutex_;
  double now_;
};

/// Sliding 60 s window: at most `cap` acquisitions in any half-open
/// interval [t, t + 60).
class RateLimiter {
 public:
  RateLimiter(int cap, Clock& clock, double window_seconds = 60.0);

  /// Blocks (through the clock) until a slot is free; returns the grant time.
  double acquire();

 private:
  int cap_;
  Clock& clock_;
  double window_;
  std::mutex mutex_;
  std::deque<double> issued_;
};

/// One line per retry: "<attempt> <status> <delay>".
using RetryLog = std::function<void(const std::string&)>;

class LlmClient {
 public:
  explicit LlmClient(EndpointConfig cfg, std::shared_ptr<Clock> clock = std::make_shared<SystemClock>(),
                     RetryLog log = {});

  /// Single-turn chat completion; returns the first choice's message content.
  std::string call(const std::string& prompt);

  const EndpointConfig& config() const noexcept { return cfg_; }
  std::uint64_t requests_sent() const noexcept { return requests_.load(); }
  std::uint64_t retries() const noexcept { return retries_.load(); }

 private:
  double backoff_delay(int attempt);

  EndpointConfig cfg_;
  std::shared_ptr<Clock> clock_;
  RetryLog log_;
  RateLimiter limiter_;
  std::counting_semaphore<1024> in_flight_;
  std::mutex jitter_mutex_;
  std::uint64_t jitter_state_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> retries_{0};
};

/// Convenience: one call through a fresh client on the system clock.
std::string call_llm(const EndpointConfig& cfg, const std::string& prompt);

struct Sections {
  std::string positive;
  std::string negative;
};

/// Accepted header forms, in order of introduction.
inline constexpr int kHeaderGrammarVersion = 1;

/// Splits a response at the two numbered headers (case-insensitive, either
/// apostrophe, "could lead" or "could potentially lead"). Both parts trimmed.
Sections parse_sections(const std::string& raw);

/// "positive", "negative", "pos_neg" or "neg_pos".
std::string compose_variant(const Sections& sections, const std::string& variant);

/// Renders sections back into the two-header answer format.
std::string render_sections(const Sections& sections);

struct RefineResult {
  std::string id;
  std::string raw;
  std::string positive;
  std::string negative;
  std::string model;
  bool retrieved_from_cache = false;
};

std::string cache_key(const std::string& prompt, const std::string& model);

using WarningSink = std::function<void(const std::string&)>;

/// Looks up (prompt, model) in `cache_dir`; on a miss calls the client,
/// persists the raw answer and returns the parsed result. An unparseable
/// answer is cached too, so FormatMismatch is raised again on later hits
/// without another request.
RefineResult cached_refine(const std::filesystem::path& cache_dir, LlmClient& client, const LoanRecord& record,
                           const WarningSink& warn = {});

struct RefineSummary {
  std::size_t refined = 0;
  std::size_t from_cache = 0;
  std::vector<std::string> format_mismatches;  // record ids left unrefined
};

/// Fills refined_texts (full, positive, negative, pos_neg, neg_pos) for every
/// record. Records whose answer does not parse are listed, not fatal.
RefineSummary refine_dataset(Dataset& dataset, const std::filesystem::path& cache_dir, LlmClient& client,
                             int workers = 1, const WarningSink& warn = {});

}  // namespace credtext
