#pragma once

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "medground/synthesis/backend.hpp"

namespace medground {

/// Caps in-flight requests and spaces request starts by 1/rate seconds.
class RateLimiter {
 public:
  RateLimiter(int concurrency, double per_second)
      : capacity_(std::max(1, concurrency)),
        interval_(per_second > 0 ? std::chrono::duration_cast<Clock::duration>(
                                       std::chrono::duration<double>(1.0 / per_second))
                                 : Clock::duration::zero()) {}

  class Permit {
   public:
    explicit Permit(RateLimiter* owner) : owner_(owner) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    ~Permit() { owner_->release(); }

   private:
    RateLimiter* owner_;
  };

  Permit acquire() {
    Clock::time_point slot;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return in_flight_ < capacity_; });
      ++in_flight_;
      peak_ = std::max(peak_, in_flight_);
      slot = std::max(Clock::now(), next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
    return Permit(this);
  }

  [[nodiscard]] int peak() const {
    std::lock_guard lock(mu_);
    return peak_;
  }

 private:
  using Clock = std::chrono::steady_clock;

  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  int capacity_;
  int in_flight_ = 0;
  int peak_ = 0;
  Clock::duration interval_;
  Clock::time_point next_{};
};

namespace detail {

struct EndpointParts {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline EndpointParts split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint must start with http:// or https://");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline std::string png_data_url(const std::vector<std::uint8_t>& png) {
  return "data:image/png;base64," +
         httplib::detail::base64_encode(std::string(png.begin(), png.end()));
}

}  // namespace detail

/// Client for an OpenAI-compatible chat-completions endpoint.
class LiveBackend final : public Backend {
 public:
  explicit LiveBackend(BackendConfig cfg)
      : cfg_(std::move(cfg)),
        parts_(detail::split_endpoint(cfg_.endpoint)),
        limiter_(cfg_.concurrency, cfg_.rate_limit) {
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (key == nullptr || *key == '\0')
        throw ConfigError("environment variable " + cfg_.api_key_env + " is not set");
      api_key_ = key;
    }
  }

  std::string generate(const PromptBundle& b) override {
    return chat("generate", b.system_prompt, b.user_prompt, b.image_png, cfg_.temperature);
  }

  std::string judge(const JudgeRequest& r) override {
    return chat("judge", r.system_prompt, r.user_prompt, r.overlay_png, cfg_.judge_temperature);
  }

  [[nodiscard]] std::string tag() const override { return "live:" + cfg_.model; }
  [[nodiscard]] bool wants_images() const override { return true; }

 private:
  static bool transient(int status) { return status == 408 || status == 429 || status >= 500; }

  std::string chat(const char* kind, const std::string& system, const std::string& user,
                   const std::vector<std::uint8_t>& png, double temperature) {
    Json content = Json::array();
    content.push_back({{"type", "text"}, {"text", user}});
    if (!png.empty())
      content.push_back(
          {{"type", "image_url"}, {"image_url", {{"url", detail::png_data_url(png)}}}});
    Json body;
    body["model"] = cfg_.model;
    body["temperature"] = temperature;
    body["response_format"] = {{"type", "json_object"}};
    body["messages"] = Json::array({Json{{"role", "system"}, {"content", system}},
                                    Json{{"role", "user"}, {"content", std::move(content)}}});
    const std::string payload = dump_compact(body);

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        const auto wait = std::chrono::milliseconds(static_cast<long long>(cfg_.backoff_ms)
                                                    << std::min(attempt - 1, 16));
        std::this_thread::sleep_for(wait);
      }
      int status = 0;
      std::string response;
      {
        auto permit = limiter_.acquire();
        httplib::Client cli(parts_.base);
        cli.set_connection_timeout(10);
        cli.set_read_timeout(cfg_.timeout_s);
        cli.set_write_timeout(cfg_.timeout_s);
        auto res = cli.Post(parts_.path, headers, payload, "application/json");
        if (res) {
          status = res->status;
          response = res->body;
        } else {
          last_error = "connection error: " + httplib::to_string(res.error());
        }
      }
      log(kind, attempt, body, status, status ? response : last_error);

      if (status == 200) {
        Json env = Json::parse(response, nullptr, false);
        try {
          if (!env.is_discarded())
            return env.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const Json::exception&) {
        }
        last_error = "unexpected response envelope";
        continue;
      }
      if (status == 401 || status == 403)
        throw BackendError(BackendFailure::kAuth, "HTTP " + std::to_string(status));
      if (status == 413) throw BackendError(BackendFailure::kPayloadTooLarge, "HTTP 413");
      if (status != 0) {
        last_error = "HTTP " + std::to_string(status);
        if (!transient(status)) break;
      }
    }
    throw BackendError(BackendFailure::kExhaustedRetries, last_error);
  }

  void log(const char* kind, int attempt, const Json& request, int status,
           const std::string& response) {
    if (cfg_.transcript_log.empty()) return;
    Json redacted = request;
    for (Json& msg : redacted["messages"]) {
      if (!msg["content"].is_array()) continue;
      for (Json& part : msg["content"])
        if (part.contains("image_url")) part["image_url"]["url"] = "<png omitted>";
    }
    Json line;
    line["kind"] = kind;
    line["attempt"] = attempt;
    line["request"] = std::move(redacted);
    line["status"] = status;
    line["response"] = response;
    std::lock_guard lock(log_mu_);
    std::ofstream out(cfg_.transcript_log, std::ios::app);
    out << dump_compact(line) << '\n';
  }

  BackendConfig cfg_;
  detail::EndpointParts parts_;
  std::string api_key_;
  RateLimiter limiter_;
  std::mutex log_mu_;
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == "live") return std::make_unique<LiveBackend>(cfg);
  return std::make_unique<MockBackend>(cfg);
}

}  // namespace medground
