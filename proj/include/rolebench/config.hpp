#pragma once

// Run configuration: provider registry, role bindings, sampling profiles, retry
// policy and seed. Loaded from a YAML file.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rolebench/error.hpp"

namespace rolebench {

struct SamplingProfile {
  double temperature = 0.6;
  double top_p = 0.9;
  std::optional<double> frequency_penalty;
  std::optional<int> max_tokens;

  bool operator==(const SamplingProfile&) const = default;
};

inline SamplingProfile player_sampling() { return {0.6, 0.9, std::nullopt, std::nullopt}; }
inline SamplingProfile interrogator_sampling() { return {0.8, 0.95, std::nullopt, std::nullopt}; }
inline SamplingProfile judge_sampling() { return {0.1, 0.95, std::nullopt, std::nullopt}; }

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{1000};
  double multiplier = 2.0;

  /// Delay before attempt `attempt + 1`, where `attempt` is 1-based.
  std::chrono::milliseconds delay_after(int attempt) const {
    double d = static_cast<double>(initial_delay.count());
    for (int i = 1; i < attempt; ++i) d *= multiplier;
    return std::chrono::milliseconds(static_cast<std::int64_t>(d));
  }

  bool operator==(const RetryPolicy&) const = default;
};

enum class ProviderKind { openai, scripted };

struct ProviderSpec {
  std::string id;
  ProviderKind kind = ProviderKind::openai;
  std::string base_url;          // openai: e.g. https://api.openai.com/v1
  std::string api_key_env;       // openai: name of the env var holding the bearer token
  std::filesystem::path script;  // scripted: JSONL fixture
  int max_in_flight = 4;
  double timeout_seconds = 120.0;

  bool operator==(const ProviderSpec&) const = default;
};

struct RoleBinding {
  std::string provider;
  std::string model;
  SamplingProfile sampling;
  bool system_prompt = true;  // false: fold the system prompt into the first user message

  bool operator==(const RoleBinding&) const = default;
};

struct RunConfig {
  std::vector<ProviderSpec> providers;
  std::vector<RoleBinding> players;
  RoleBinding interrogator;
  std::vector<RoleBinding> judges;
  RetryPolicy retry;
  std::uint64_t seed = 0;
  int workers = 4;
  double max_failure_ratio = 0.2;
  bool include_refused_turns = true;

  const ProviderSpec* find_provider(const std::string& id) const {
    for (const auto& p : providers)
      if (p.id == id) return &p;
    return nullptr;
  }

  const RoleBinding* find_player(const std::string& model) const {
    for (const auto& p : players)
      if (p.model == model) return &p;
    return nullptr;
  }

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::size_t yaml_line(const YAML::Mark& mark) { return mark.line >= 0 ? static_cast<std::size_t>(mark.line) + 1 : 0; }

inline YAML::Node load_yaml_file(const std::filesystem::path& path) {
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw IoError("cannot open " + path.string());
  } catch (const YAML::Exception& e) {
    throw ParseError(path.string(), yaml_line(e.mark), e.msg);
  }
}

template <typename T>
T yaml_as(const YAML::Node& node, const std::filesystem::path& path, const char* field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception& e) {
    throw ParseError(path.string(), yaml_line(node.Mark()), std::string("field ") + field + ": " + e.msg);
  }
}

inline SamplingProfile parse_sampling(const YAML::Node& node, SamplingProfile base, const std::filesystem::path& path) {
  if (!node) return base;
  if (node["temperature"]) base.temperature = yaml_as<double>(node["temperature"], path, "temperature");
  if (node["top_p"]) base.top_p = yaml_as<double>(node["top_p"], path, "top_p");
  if (node["frequency_penalty"])
    base.frequency_penalty = yaml_as<double>(node["frequency_penalty"], path, "frequency_penalty");
  if (node["max_tokens"]) base.max_tokens = yaml_as<int>(node["max_tokens"], path, "max_tokens");
  return base;
}

inline RoleBinding parse_binding(const YAML::Node& node, const SamplingProfile& defaults,
                                 const std::filesystem::path& path) {
  RoleBinding b;
  b.sampling = defaults;
  if (!node || !node.IsMap()) throw ParseError(path.string(), node ? yaml_line(node.Mark()) : 0, "role binding must be a map");
  if (node["provider"]) b.provider = yaml_as<std::string>(node["provider"], path, "provider");
  if (node["model"]) b.model = yaml_as<std::string>(node["model"], path, "model");
  if (node["system_prompt"]) b.system_prompt = yaml_as<bool>(node["system_prompt"], path, "system_prompt");
  b.sampling = parse_sampling(node["sampling"], defaults, path);
  return b;
}

inline void check_sampling(const SamplingProfile& s, const std::string& who, std::vector<std::string>& problems) {
  if (s.temperature < 0) problems.push_back(who + ": temperature must be >= 0");
  if (!(s.top_p > 0 && s.top_p <= 1)) problems.push_back(who + ": top_p must lie in (0, 1]");
  if (s.max_tokens && *s.max_tokens <= 0) problems.push_back(who + ": max_tokens must be positive");
}

}  // namespace detail

/// Checks cross references and ranges; throws ValidationError listing every problem.
inline void validate(const RunConfig& cfg) {
  std::vector<std::string> problems;
  std::set<std::string> ids;
  for (const auto& p : cfg.providers) {
    if (p.id.empty()) problems.push_back("provider with empty id");
    if (!ids.insert(p.id).second) problems.push_back("duplicate provider id '" + p.id + "'");
    if (p.max_in_flight < 1) problems.push_back("provider '" + p.id + "': max_in_flight must be >= 1");
    if (p.kind == ProviderKind::openai && p.base_url.empty())
      problems.push_back("provider '" + p.id + "': base_url is required");
    if (p.kind == ProviderKind::scripted && p.script.empty())
      problems.push_back("provider '" + p.id + "': script is required");
  }
  auto check_binding = [&](const RoleBinding& b, const std::string& who) {
    if (b.model.empty()) problems.push_back(who + ": model is required");
    if (!cfg.find_provider(b.provider))
      problems.push_back(who + ": provider '" + b.provider + "' is not registered");
    detail::check_sampling(b.sampling, who, problems);
  };
  for (const auto& p : cfg.players) check_binding(p, "player '" + p.model + "'");
  check_binding(cfg.interrogator, "interrogator");
  if (cfg.judges.empty()) problems.push_back("at least one judge is required");
  std::set<std::string> judge_models;
  for (const auto& j : cfg.judges) {
    check_binding(j, "judge '" + j.model + "'");
    if (!judge_models.insert(j.model).second) problems.push_back("duplicate judge model '" + j.model + "'");
  }
  if (cfg.retry.max_attempts < 1) problems.push_back("retry.max_attempts must be >= 1");
  if (cfg.workers < 1) problems.push_back("workers must be >= 1");
  if (cfg.max_failure_ratio < 0 || cfg.max_failure_ratio > 1) problems.push_back("max_failure_ratio must lie in [0, 1]");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const YAML::Node root = detail::load_yaml_file(path);
  if (!root.IsMap()) throw ParseError(path.string(), 1, "run config must be a map");
  const auto base_dir = path.parent_path();

  RunConfig cfg;
  if (root["seed"]) cfg.seed = detail::yaml_as<std::uint64_t>(root["seed"], path, "seed");
  if (root["workers"]) cfg.workers = detail::yaml_as<int>(root["workers"], path, "workers");
  if (root["max_failure_ratio"])
    cfg.max_failure_ratio = detail::yaml_as<double>(root["max_failure_ratio"], path, "max_failure_ratio");
  if (root["include_refused_turns"])
    cfg.include_refused_turns = detail::yaml_as<bool>(root["include_refused_turns"], path, "include_refused_turns");

  if (const auto retry = root["retry"]) {
    if (retry["max_attempts"]) cfg.retry.max_attempts = detail::yaml_as<int>(retry["max_attempts"], path, "max_attempts");
    if (retry["initial_delay_ms"])
      cfg.retry.initial_delay =
          std::chrono::milliseconds(detail::yaml_as<std::int64_t>(retry["initial_delay_ms"], path, "initial_delay_ms"));
    if (retry["multiplier"]) cfg.retry.multiplier = detail::yaml_as<double>(retry["multiplier"], path, "multiplier");
  }

  for (const auto& node : root["providers"]) {
    ProviderSpec p;
    p.id = detail::yaml_as<std::string>(node["id"], path, "id");
    const auto type = node["type"] ? detail::yaml_as<std::string>(node["type"], path, "type") : std::string("openai");
    if (type == "openai") {
      p.kind = ProviderKind::openai;
    } else if (type == "scripted") {
      p.kind = ProviderKind::scripted;
    } else {
      throw ParseError(path.string(), detail::yaml_line(node["type"].Mark()), "unknown provider type '" + type + "'");
    }
    if (node["base_url"]) p.base_url = detail::yaml_as<std::string>(node["base_url"], path, "base_url");
    if (node["api_key_env"]) p.api_key_env = detail::yaml_as<std::string>(node["api_key_env"], path, "api_key_env");
    if (node["script"]) {
      std::filesystem::path script = detail::yaml_as<std::string>(node["script"], path, "script");
      p.script = script.is_relative() ? base_dir / script : script;
    }
    if (node["max_in_flight"]) p.max_in_flight = detail::yaml_as<int>(node["max_in_flight"], path, "max_in_flight");
    if (node["timeout_s"]) p.timeout_seconds = detail::yaml_as<double>(node["timeout_s"], path, "timeout_s");
    cfg.providers.push_back(std::move(p));
  }

  const YAML::Node sampling = root["sampling"];
  const auto player_defaults = detail::parse_sampling(sampling ? sampling["player"] : YAML::Node{}, player_sampling(), path);
  const auto interrogator_defaults =
      detail::parse_sampling(sampling ? sampling["interrogator"] : YAML::Node{}, interrogator_sampling(), path);
  const auto judge_defaults = detail::parse_sampling(sampling ? sampling["judge"] : YAML::Node{}, judge_sampling(), path);

  const YAML::Node roles = root["roles"];
  if (!roles) throw ParseError(path.string(), 0, "missing 'roles' section");
  for (const auto& node : roles["players"]) cfg.players.push_back(detail::parse_binding(node, player_defaults, path));
  if (!roles["interrogator"]) throw ParseError(path.string(), detail::yaml_line(roles.Mark()), "missing roles.interrogator");
  cfg.interrogator = detail::parse_binding(roles["interrogator"], interrogator_defaults, path);
  for (const auto& node : roles["judges"]) cfg.judges.push_back(detail::parse_binding(node, judge_defaults, path));

  validate(cfg);
  return cfg;
}

}  // namespace rolebench
