#pragma once

// Runs conversations: the interrogator speaks, the player answers, for exactly
// the situation's turn budget. Refusals are left to the judges.

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rolebench/assets.hpp"
#include "rolebench/json_extract.hpp"
#include "rolebench/prompts.hpp"
#include "rolebench/provider.hpp"
#include "rolebench/transcript.hpp"

namespace rolebench {

inline constexpr const char* kInterrogatorRole = "interrogator";
inline constexpr const char* kPlayerRole = "player";

/// One conversation as persisted in the run artifact.
struct ConversationRecord {
  Transcript transcript;
  Language language = Language::en;
  std::vector<TelemetryRecord> telemetry;

  bool operator==(const ConversationRecord&) const = default;
};

struct ConversationRoles {
  RoleBinding player;
  RoleBinding interrogator;
};

inline std::string parse_next_utterance(const std::string& raw) {
  const Json payload = extract_json_payload(raw);
  if (!payload.is_object()) throw MalformedOutput("interrogator output is not a JSON object");
  const auto it = payload.find("next_utterance");
  if (it == payload.end() || !it->is_string()) throw MalformedOutput("interrogator output lacks a next_utterance string");
  return it->get<std::string>();
}

inline std::string next_user_utterance(const ChatClient& client, const RoleBinding& interrogator,
                                       const std::string& summary, const Situation& situation,
                                       const Transcript& transcript, std::vector<TelemetryRecord>* telemetry = nullptr,
                                       const PromptTemplates& templates = builtin_templates()) {
  if (transcript.completed_turns >= transcript.turn_budget)
    throw Error("turn budget of " + transcript.key.str() + " is already spent");
  ChatRequest request{interrogator.model,
                      {{"user", render_interrogator(summary, situation, transcript, templates)}},
                      interrogator.sampling};
  const CallContext ctx{kInterrogatorRole, transcript.key.str(), transcript.completed_turns};
  return client.call(interrogator, request, ctx, parse_next_utterance, telemetry);
}

/// Chat messages sent to the player: its system prompt followed by the transcript.
/// Models without a system role get the prompt prepended to the first user message.
inline std::vector<ChatMessage> player_messages(const std::string& system_prompt, const Transcript& transcript,
                                                bool system_role) {
  std::vector<ChatMessage> out;
  if (system_role) out.push_back({"system", system_prompt});
  bool folded = system_role;
  for (const auto& m : transcript.messages) {
    if (!folded && m.role == "user") {
      out.push_back({"user", system_prompt + "\n\n" + m.content});
      folded = true;
    } else {
      out.push_back(m);
    }
  }
  return out;
}

inline std::string next_player_reply(const ChatClient& client, const RoleBinding& player, const CharacterCard& card,
                                     const Transcript& transcript, std::vector<TelemetryRecord>* telemetry = nullptr,
                                     const PromptTemplates& templates = builtin_templates()) {
  if (transcript.messages.empty() || transcript.messages.back().role != "user")
    throw Error("player reply requested for " + transcript.key.str() + " but the last message is not from the user");
  ChatRequest request{player.model, player_messages(render_player(card, templates), transcript, player.system_prompt),
                      player.sampling};
  const CallContext ctx{kPlayerRole, transcript.key.str(), transcript.completed_turns};
  return client.complete(player, request, ctx, telemetry);
}

inline ConversationRecord run_conversation(const ChatClient& client, const ConversationRoles& roles,
                                           const CharacterCard& card, const Situation& situation,
                                           const PromptTemplates& templates = builtin_templates()) {
  ConversationRecord record;
  record.language = situation.language;
  Transcript& t = record.transcript;
  t.key = {roles.player.model, card.id, situation.id};
  t.turn_budget = situation.turn_budget;
  if (card.initial_message) t.messages.push_back({"assistant", *card.initial_message});

  const char* stage = kInterrogatorRole;
  try {
    while (t.completed_turns < t.turn_budget) {
      stage = kInterrogatorRole;
      auto utterance = next_user_utterance(client, roles.interrogator, card.char_summary, situation, t,
                                           &record.telemetry, templates);
      t.messages.push_back({"user", std::move(utterance)});
      stage = kPlayerRole;
      auto reply = next_player_reply(client, roles.player, card, t, &record.telemetry, templates);
      t.messages.push_back({"assistant", std::move(reply)});
      ++t.completed_turns;
    }
  } catch (const ProviderFailure& e) {
    t.failure = ConversationFailure{stage, t.completed_turns, e.what(), e.attempts()};
  }
  return record;
}

struct MatrixOptions {
  int workers = 4;
  double max_failure_ratio = 0.2;
};

struct MatrixRun {
  std::vector<ConversationRecord> records;  // matrix order
  std::size_t failed = 0;
  bool ok = true;  // false when more than max_failure_ratio of conversations failed
};

/// Runs every character x situation pair for one player on a bounded worker
/// pool. Output order is the matrix order regardless of completion order.
inline MatrixRun run_matrix(const ChatClient& client, const ConversationRoles& roles, const AssetSet& assets,
                            const MatrixOptions& options = {}, const PromptTemplates& templates = builtin_templates()) {
  const auto pairs = matrix(assets);
  MatrixRun run;
  run.records.resize(pairs.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      try {
        run.records[i] = run_conversation(client, roles, *pairs[i].first, *pairs[i].second, templates);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    const auto n = static_cast<std::size_t>(std::max(1, options.workers));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(n, pairs.size()); ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  for (const auto& r : run.records)
    if (r.transcript.failure) ++run.failed;
  run.ok = !pairs.empty() &&
           static_cast<double>(run.failed) <= options.max_failure_ratio * static_cast<double>(pairs.size());
  return run;
}

}  // namespace rolebench
