#pragma once

// OpenAI-compatible chat-completions endpoint over HTTP(S).

#include <chrono>
#include <cstdlib>
#include <map>
#include <memory>
#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rolebench/config.hpp"
#include "rolebench/error.hpp"
#include "rolebench/provider.hpp"

namespace rolebench {

struct HttpResult {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::map<std::string, std::string>;

/// Minimal POST transport; swapped for a simulated one in tests.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& path, const std::string& body, const HttpHeaders& headers) = 0;
};

class HttplibTransport final : public HttpTransport {
 public:
  /// `base_url` like "https://api.openai.com/v1"; the path component becomes a prefix.
  explicit HttplibTransport(const std::string& base_url, double timeout_seconds = 120.0) : timeout_(timeout_seconds) {
    const auto scheme_end = base_url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = base_url.find('/', host_start);
    origin_ = base_url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  HttpResult post(const std::string& path, const std::string& body, const HttpHeaders& headers) override {
    httplib::Client client(origin_);
    const auto secs = static_cast<time_t>(timeout_);
    const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(30, 0);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(prefix_ + path, h, body, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
        throw TimeoutError(origin_ + ": " + httplib::to_string(err));
      throw TransportError(origin_ + ": " + httplib::to_string(err));
    }
    return {res->status, res->body};
  }

 private:
  std::string origin_;
  std::string prefix_;
  double timeout_;
};

inline nlohmann::json openai_request_body(const ChatRequest& req) {
  nlohmann::json body;
  body["model"] = req.model;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : req.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = req.sampling.temperature;
  body["top_p"] = req.sampling.top_p;
  if (req.sampling.frequency_penalty) body["frequency_penalty"] = *req.sampling.frequency_penalty;
  if (req.sampling.max_tokens) body["max_tokens"] = *req.sampling.max_tokens;
  body["stream"] = false;
  return body;
}

inline ChatResponse parse_openai_response(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw TransportError("response body is not JSON");
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty())
    throw TransportError("response has no choices");
  const auto& message = (*choices)[0].value("message", nlohmann::json::object());
  const auto content = message.find("content");
  ChatResponse out;
  if (content != message.end() && content->is_string()) {
    out.text = content->get<std::string>();
  } else if (content == message.end() || !content->is_null()) {
    throw TransportError("response message has no text content");
  }
  if (const auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
    if (usage->contains("prompt_tokens") && (*usage)["prompt_tokens"].is_number_integer())
      out.prompt_tokens = (*usage)["prompt_tokens"].get<int>();
    if (usage->contains("completion_tokens") && (*usage)["completion_tokens"].is_number_integer())
      out.completion_tokens = (*usage)["completion_tokens"].get<int>();
  }
  return out;
}

inline bool is_retryable_status(int status) { return status == 408 || status == 409 || status == 429 || status >= 500; }

class OpenAIProvider final : public ChatProvider {
 public:
  OpenAIProvider(std::unique_ptr<HttpTransport> transport, std::string api_key)
      : transport_(std::move(transport)), api_key_(std::move(api_key)) {}

  ChatResponse complete(const ChatRequest& request, const CallContext&) override {
    HttpHeaders headers;
    if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;
    const auto start = std::chrono::steady_clock::now();
    const HttpResult res = transport_->post("/chat/completions", openai_request_body(request).dump(), headers);
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    if (res.status < 200 || res.status >= 300) {
      const auto snippet = res.body.substr(0, 200);
      if (is_retryable_status(res.status)) throw HttpStatusError(res.status, snippet);
      throw RequestRejected(res.status, snippet);
    }
    ChatResponse out = parse_openai_response(res.body);
    out.latency_ms = elapsed;
    return out;
  }

 private:
  std::unique_ptr<HttpTransport> transport_;
  std::string api_key_;
};

/// Builds every provider of a run config. API keys are read from the environment.
inline std::shared_ptr<ProviderRegistry> build_registry(const RunConfig& cfg) {
  auto registry = std::make_shared<ProviderRegistry>();
  for (const auto& spec : cfg.providers) {
    std::shared_ptr<ChatProvider> provider;
    if (spec.kind == ProviderKind::scripted) {
      provider = ScriptedProvider::from_file(spec.script);
    } else {
      std::string key;
      if (!spec.api_key_env.empty()) {
        const char* value = std::getenv(spec.api_key_env.c_str());
        if (!value) throw Error("environment variable " + spec.api_key_env + " is not set (provider '" + spec.id + "')");
        key = value;
      }
      provider = std::make_shared<OpenAIProvider>(std::make_unique<HttplibTransport>(spec.base_url, spec.timeout_seconds),
                                                  std::move(key));
    }
    registry->add(spec.id, std::move(provider), spec.max_in_flight);
  }
  return registry;
}

}  // namespace rolebench
