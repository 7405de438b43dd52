#pragma once

// Local OpenAI-style chat endpoint for refine tests.

#include <httplib.h>

#include <atomic>
#include <deque>
#include <functional>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>

#include "credtext/refine.hpp"

namespace stub {

// Published example answer for a defaulter, joined across its page break.
inline const char* kExampleAnswer =
    "1. Factors supporting the borrower’s repayment: * The borrower has good peer relationships, actively cooperates "
    "with the credit officer’s investigation, and provides valid documents, which indicates that the borrower has a "
    "good cooperative attitude and integrity. This is conducive to their establishing a cooperative relationship with "
    "the bank. * The borrower has a stable social status and some resources, which may have a positive influence on "
    "the borrower's future repayment. * The borrower attaches importance to the risk of default and has no obvious "
    "factors that might affect their willingness to repay, which indicates that the borrower has the willingness and "
    "ability to repay, and this may help the bank to conduct risk assessments and controls. 2. Factors that could "
    "lead to the borrower's default: * The borrower's personal credit check shows that there were several overdue "
    "payments on credit cards, and this led to a downgraded credit rating of A. Although the borrower indicates that "
    "they are usually busy with work and therefore did not make timely payments, this may have a negative impact on "
    "the borrower's credit risk assessment. Therefore, the bank needs to carefully consider the setting of the loan "
    "amount, interest rate, etc. * The borrower has a large amount of receivables, which may affect the borrower's "
    "future cash flow and hence ability to repay. Therefore, the bank needs to conduct a detailed review of the "
    "borrower's receivables to fully examine their true business operations and consider the impact of this factor "
    "in risk control.";

inline std::string chat_body(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

// Local chat endpoint replaying a scripted list of (status, body) replies;
// once the script runs out it answers 200 with `fallback`.
class StubServer {
 public:
  StubServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      std::lock_guard lock(mutex_);
      if (on_request_) on_request_();
      last_request_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (!script_.empty()) {
        auto [status, body] = script_.front();
        script_.pop_front();
        res.status = status;
        res.set_content(body, "application/json");
        return;
      }
      res.status = 200;
      res.set_content(chat_body(fallback_), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  void push(int status, std::string body) {
    std::lock_guard lock(mutex_);
    script_.emplace_back(status, std::move(body));
  }
  void set_fallback(std::string content) {
    std::lock_guard lock(mutex_);
    fallback_ = std::move(content);
  }
  // runs inside the handler, before the reply is chosen
  void on_request(std::function<void()> fn) {
    std::lock_guard lock(mutex_);
    on_request_ = std::move(fn);
  }
  int hits() const { return hits_.load(); }
  std::string last_request() {
    std::lock_guard lock(mutex_);
    return last_request_;
  }
  std::string last_auth() {
    std::lock_guard lock(mutex_);
    return last_auth_;
  }

  credtext::EndpointConfig endpoint() const {
    credtext::EndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    cfg.api_key_env = "CREDTEXT_TEST_KEY";
    cfg.backoff_base_seconds = 0.5;
    cfg.timeout_seconds = 5;
    cfg.rpm_cap = 1000;
    return cfg;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::mutex mutex_;
  std::deque<std::pair<int, std::string>> script_;
  std::string fallback_ = kExampleAnswer;
  std::string last_request_, last_auth_;
  std::function<void()> on_request_;
};

}  // namespace stub
