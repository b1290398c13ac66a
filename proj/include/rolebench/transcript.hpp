#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolebench/error.hpp"
#include "rolebench/provider.hpp"

namespace rolebench {

/// Stable identity of a conversation across runs and re-judging.
struct ConversationKey {
  std::string player_model;
  std::string character_id;
  std::string situation_id;

  std::string str() const { return player_model + "/" + character_id + "/" + situation_id; }

  auto operator<=>(const ConversationKey&) const = default;
};

struct ConversationFailure {
  std::string role;
  int step = 0;
  std::string message;
  std::vector<std::string> attempts;

  bool operator==(const ConversationFailure&) const = default;
};

/// One character x situation conversation. `messages` holds an optional leading
/// greeting (assistant) followed by strictly alternating user/assistant messages.
struct Transcript {
  ConversationKey key;
  int turn_budget = 0;
  std::vector<ChatMessage> messages;
  int completed_turns = 0;
  std::optional<ConversationFailure> failure;

  bool has_greeting() const { return !messages.empty() && messages.front().role == "assistant"; }
  bool complete() const { return !failure && completed_turns == turn_budget; }

  /// Generated player replies, i.e. assistant messages excluding the greeting.
  std::vector<const ChatMessage*> player_replies() const {
    std::vector<const ChatMessage*> out;
    for (std::size_t i = has_greeting() ? 1 : 0; i < messages.size(); ++i)
      if (messages[i].role == "assistant") out.push_back(&messages[i]);
    return out;
  }

  bool operator==(const Transcript&) const = default;
};

/// Empty when the alternation invariant holds, otherwise a description of the first violation.
inline std::optional<std::string> alternation_violation(const Transcript& t) {
  std::size_t i = t.has_greeting() ? 1 : 0;
  int pairs = 0;
  for (std::size_t k = 0; i < t.messages.size(); ++i, ++k) {
    const char* expected = k % 2 == 0 ? "user" : "assistant";
    if (t.messages[i].role != expected)
      return "message " + std::to_string(i) + " has role " + t.messages[i].role + ", expected " + expected;
    if (k % 2 == 1) ++pairs;
  }
  if (pairs != t.completed_turns)
    return "completed_turns is " + std::to_string(t.completed_turns) + " but transcript holds " + std::to_string(pairs) +
           " full turns";
  return std::nullopt;
}

inline nlohmann::json to_json(const Transcript& t) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : t.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json j{{"player_model", t.key.player_model},
                   {"character_id", t.key.character_id},
                   {"situation_id", t.key.situation_id},
                   {"turn_budget", t.turn_budget},
                   {"completed_turns", t.completed_turns},
                   {"messages", std::move(messages)}};
  if (t.failure) {
    j["failure"] = {{"role", t.failure->role},
                    {"step", t.failure->step},
                    {"message", t.failure->message},
                    {"attempts", t.failure->attempts}};
  } else {
    j["failure"] = nullptr;
  }
  return j;
}

inline Transcript transcript_from_json(const nlohmann::json& j) {
  Transcript t;
  t.key = {j.at("player_model").get<std::string>(), j.at("character_id").get<std::string>(),
           j.at("situation_id").get<std::string>()};
  t.turn_budget = j.at("turn_budget").get<int>();
  t.completed_turns = j.at("completed_turns").get<int>();
  for (const auto& m : j.at("messages"))
    t.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  if (j.contains("failure") && !j["failure"].is_null()) {
    const auto& f = j["failure"];
    t.failure = ConversationFailure{f.at("role").get<std::string>(), f.at("step").get<int>(),
                                    f.at("message").get<std::string>(),
                                    f.at("attempts").get<std::vector<std::string>>()};
  }
  return t;
}

}  // namespace rolebench
