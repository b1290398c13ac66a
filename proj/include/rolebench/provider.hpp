#pragma once

// Uniform chat-completion client: request types, the provider interface, the
// retrying client with per-endpoint permits, and the scripted provider used by
// hermetic tests and fixture runs.

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolebench/config.hpp"
#include "rolebench/error.hpp"

namespace rolebench {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  SamplingProfile sampling;
};

inline void validate(const ChatRequest& req) {
  std::vector<std::string> problems;
  if (req.model.empty()) problems.push_back("request model is empty");
  if (req.messages.empty()) problems.push_back("request has no messages");
  for (std::size_t i = 0; i < req.messages.size(); ++i) {
    const auto& role = req.messages[i].role;
    if (role != "system" && role != "user" && role != "assistant")
      problems.push_back("message " + std::to_string(i) + " has unknown role '" + role + "'");
    if (i > 0 && role == "assistant" && req.messages[i - 1].role == "assistant")
      problems.push_back("messages " + std::to_string(i - 1) + " and " + std::to_string(i) + " are both assistant");
  }
  std::vector<std::string> sampling_problems;
  detail::check_sampling(req.sampling, "request", sampling_problems);
  problems.insert(problems.end(), sampling_problems.begin(), sampling_problems.end());
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

/// Who is calling and for which conversation step. Scripted providers key on it;
/// HTTP providers only use it for telemetry.
struct CallContext {
  std::string role;  // "interrogator", "player" or "judge:<model>"
  std::string conversation_key;
  int step = 0;

  std::string describe() const { return role + " " + conversation_key + " step " + std::to_string(step); }
};

struct ChatResponse {
  std::string text;
  std::int64_t latency_ms = 0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse complete(const ChatRequest& request, const CallContext& ctx) = 0;
};

/// Replays queued responses keyed by (role, conversation key, step). Several
/// responses for one key are served in order, which is how retries are scripted.
class ScriptedProvider final : public ChatProvider {
 public:
  struct Entry {
    std::string role;
    std::string key;
    int step = 0;
    std::string response;
  };

  struct LoggedRequest {
    CallContext ctx;
    ChatRequest request;
  };

  void add(std::string role, std::string key, int step, std::string response) {
    std::lock_guard lock(mutex_);
    queue_[{std::move(role), std::move(key), step}].push_back(std::move(response));
  }

  /// Fixture file: one JSON object per line with role, key, step and response.
  static std::shared_ptr<ScriptedProvider> from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script " + path.string());
    auto provider = std::make_shared<ScriptedProvider>();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw ParseError(path.string(), lineno, "not a JSON object");
      try {
        provider->add(j.at("role").get<std::string>(), j.at("key").get<std::string>(), j.at("step").get<int>(),
                      j.at("response").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), lineno, e.what());
      }
    }
    return provider;
  }

  static nlohmann::json entry_json(const Entry& e) {
    return {{"role", e.role}, {"key", e.key}, {"step", e.step}, {"response", e.response}};
  }

  ChatResponse complete(const ChatRequest& request, const CallContext& ctx) override {
    std::lock_guard lock(mutex_);
    log_.push_back({ctx, request});
    auto it = queue_.find({ctx.role, ctx.conversation_key, ctx.step});
    if (it == queue_.end() || it->second.empty()) throw ScriptExhausted(ctx.describe());
    ChatResponse out;
    out.text = std::move(it->second.front());
    it->second.pop_front();
    return out;
  }

  std::size_t remaining() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& [k, q] : queue_) n += q.size();
    return n;
  }

  std::vector<LoggedRequest> requests() const {
    std::lock_guard lock(mutex_);
    return log_;
  }

 private:
  using Key = std::tuple<std::string, std::string, int>;

  mutable std::mutex mutex_;
  std::map<Key, std::deque<std::string>> queue_;
  std::vector<LoggedRequest> log_;
};

/// One record per logical call, however many attempts it took.
struct TelemetryRecord {
  std::string role;
  int step = 0;
  std::string provider;
  std::string model;
  int attempts = 0;
  std::int64_t latency_ms = 0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  std::optional<std::string> error;

  bool operator==(const TelemetryRecord&) const = default;
};

inline nlohmann::json to_json(const TelemetryRecord& t) {
  nlohmann::json j{{"role", t.role},         {"step", t.step},         {"provider", t.provider},
                   {"model", t.model},       {"attempts", t.attempts}, {"latency_ms", t.latency_ms}};
  j["prompt_tokens"] = t.prompt_tokens ? nlohmann::json(*t.prompt_tokens) : nlohmann::json(nullptr);
  j["completion_tokens"] = t.completion_tokens ? nlohmann::json(*t.completion_tokens) : nlohmann::json(nullptr);
  j["error"] = t.error ? nlohmann::json(*t.error) : nlohmann::json(nullptr);
  return j;
}

inline TelemetryRecord telemetry_from_json(const nlohmann::json& j) {
  TelemetryRecord t;
  t.role = j.at("role").get<std::string>();
  t.step = j.at("step").get<int>();
  t.provider = j.at("provider").get<std::string>();
  t.model = j.at("model").get<std::string>();
  t.attempts = j.at("attempts").get<int>();
  t.latency_ms = j.at("latency_ms").get<std::int64_t>();
  if (j.contains("prompt_tokens") && !j["prompt_tokens"].is_null()) t.prompt_tokens = j["prompt_tokens"].get<int>();
  if (j.contains("completion_tokens") && !j["completion_tokens"].is_null())
    t.completion_tokens = j["completion_tokens"].get<int>();
  if (j.contains("error") && !j["error"].is_null()) t.error = j["error"].get<std::string>();
  return t;
}

/// Registered endpoints with a bounded number of in-flight calls each.
class ProviderRegistry {
 public:
  void add(const std::string& id, std::shared_ptr<ChatProvider> provider, int max_in_flight = 4) {
    endpoints_[id] = std::make_shared<Endpoint>(std::move(provider), max_in_flight);
  }

  bool contains(const std::string& id) const { return endpoints_.count(id) > 0; }

  ChatProvider& provider(const std::string& id) const { return *endpoint(id).provider; }

 private:
  friend class ChatClient;

  struct Endpoint {
    Endpoint(std::shared_ptr<ChatProvider> p, int permits) : provider(std::move(p)), permits(permits) {}
    std::shared_ptr<ChatProvider> provider;
    std::counting_semaphore<1024> permits;
  };

  Endpoint& endpoint(const std::string& id) const {
    auto it = endpoints_.find(id);
    if (it == endpoints_.end()) throw Error("provider '" + id + "' is not registered");
    return *it->second;
  }

  std::map<std::string, std::shared_ptr<Endpoint>> endpoints_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Sends requests through the registry under a retry policy. Transport errors,
/// retryable HTTP statuses and malformed structured output all count as failed
/// attempts; the latter is re-asked immediately, the others back off.
class ChatClient {
 public:
  explicit ChatClient(std::shared_ptr<const ProviderRegistry> registry, RetryPolicy policy = {},
                      Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : registry_(std::move(registry)), policy_(policy), sleeper_(std::move(sleeper)) {}

  const RetryPolicy& policy() const noexcept { return policy_; }

  /// Calls the endpoint and hands the raw text to `parse`; a MalformedOutput from
  /// `parse` triggers a re-ask of the same request.
  template <typename Parse>
  auto call(const RoleBinding& binding, const ChatRequest& request, const CallContext& ctx, Parse&& parse,
            std::vector<TelemetryRecord>* telemetry = nullptr) const
      -> std::invoke_result_t<Parse&, const std::string&> {
    validate(request);
    auto& endpoint = registry_->endpoint(binding.provider);

    TelemetryRecord record{ctx.role, ctx.step, binding.provider, request.model, 0, 0, {}, {}, {}};
    std::vector<std::string> history;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
      record.attempts = attempt;
      try {
        ChatResponse response;
        {
          endpoint.permits.acquire();
          struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
          } release{endpoint.permits};
          response = endpoint.provider->complete(request, ctx);
        }
        record.latency_ms += response.latency_ms;
        record.prompt_tokens = response.prompt_tokens;
        record.completion_tokens = response.completion_tokens;
        auto result = parse(response.text);
        if (telemetry) telemetry->push_back(record);
        return result;
      } catch (const MalformedOutput& e) {
        history.push_back(e.what());
      } catch (const RetryableError& e) {
        history.push_back(e.what());
        if (attempt < policy_.max_attempts) sleeper_(policy_.delay_after(attempt));
      } catch (const Error& e) {
        history.push_back(e.what());
        break;
      }
    }
    record.error = history.empty() ? std::string("no attempts") : history.back();
    if (telemetry) telemetry->push_back(record);
    throw ProviderFailure(ctx.describe(), std::move(history));
  }

  std::string complete(const RoleBinding& binding, const ChatRequest& request, const CallContext& ctx,
                       std::vector<TelemetryRecord>* telemetry = nullptr) const {
    return call(binding, request, ctx, [](const std::string& text) { return text; }, telemetry);
  }

 private:
  std::shared_ptr<const ProviderRegistry> registry_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

}  // namespace rolebench
