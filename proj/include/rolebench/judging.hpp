#pragma once

// Per-turn verdicts from each judge, their validation against the transcript,
// and mean pooling across the ensemble.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "rolebench/assets.hpp"
#include "rolebench/json_extract.hpp"
#include "rolebench/orchestrator.hpp"
#include "rolebench/prompts.hpp"
#include "rolebench/provider.hpp"

namespace rolebench {

inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 5;

struct TurnEvaluation {
  int turn = 0;
  std::string is_refusal_explanation;
  bool is_refusal = false;
  std::string in_character_explanation;
  int in_character_score = 0;
  std::string entertaining_explanation;
  int entertaining_score = 0;
  std::string fluency_explanation;
  int fluency_score = 0;

  bool operator==(const TurnEvaluation&) const = default;
};

struct JudgeVerdict {
  std::string judge_model;
  std::vector<TurnEvaluation> evaluations;  // sorted by turn, 1..n

  bool operator==(const JudgeVerdict&) const = default;
};

/// The judge answered, but not with a usable verdict. Retryable like any malformed output.
class InvalidVerdict : public MalformedOutput {
 public:
  explicit InvalidVerdict(std::vector<std::string> problems)
      : MalformedOutput(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid verdict:";
    for (const auto& p : problems) out += " " + p + ";";
    return out;
  }

  std::vector<std::string> problems_;
};

namespace detail {

inline std::optional<int> likert_field(const Json& obj, const char* field, const std::string& where,
                                       std::vector<std::string>& problems) {
  const auto it = obj.find(field);
  if (it == obj.end()) {
    problems.push_back(where + ": missing " + field);
    return std::nullopt;
  }
  double value;
  if (it->is_number_integer()) {
    value = static_cast<double>(it->get<long long>());
  } else if (it->is_number_float() && std::floor(it->get<double>()) == it->get<double>()) {
    value = it->get<double>();
  } else {
    problems.push_back(where + ": " + field + " is not an integer");
    return std::nullopt;
  }
  if (value < kLikertMin || value > kLikertMax) {
    problems.push_back(where + ": " + field + " = " + it->dump() + " is outside [1, 5]");
    return std::nullopt;
  }
  return static_cast<int>(value);
}

inline std::string explanation_field(const Json& obj, const char* field, const std::string& where,
                                     std::vector<std::string>& problems) {
  const auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    problems.push_back(where + ": missing " + field);
    return {};
  }
  auto s = it->get<std::string>();
  if (s.find_first_not_of(" \t\r\n") == std::string::npos) problems.push_back(where + ": " + field + " is empty");
  return s;
}

}  // namespace detail

/// Validates a judge payload against the transcript's completed turns.
inline JudgeVerdict parse_verdict(const Json& payload, int expected_turns, const std::string& judge_model) {
  std::vector<std::string> problems;
  if (!payload.is_object() || !payload.contains("scores") || !payload["scores"].is_array())
    throw InvalidVerdict({"missing scores array"});

  JudgeVerdict verdict{judge_model, {}};
  std::map<int, int> seen;
  for (const auto& item : payload["scores"]) {
    if (!item.is_object()) {
      problems.push_back("scores entry is not an object");
      continue;
    }
    const auto turn_it = item.find("turn");
    if (turn_it == item.end() || !turn_it->is_number_integer()) {
      problems.push_back("scores entry without an integer turn");
      continue;
    }
    TurnEvaluation e;
    e.turn = turn_it->get<int>();
    const std::string where = "turn " + std::to_string(e.turn);
    if (++seen[e.turn] == 2) problems.push_back("duplicate " + where);
    if (e.turn < 1 || e.turn > expected_turns) problems.push_back("unexpected " + where);

    e.is_refusal_explanation = detail::explanation_field(item, "is_refusal_explanation", where, problems);
    const auto refusal = item.find("is_refusal");
    if (refusal == item.end() || !refusal->is_boolean()) {
      problems.push_back(where + ": is_refusal is not a boolean");
    } else {
      e.is_refusal = refusal->get<bool>();
    }
    e.in_character_explanation = detail::explanation_field(item, "in_character_explanation", where, problems);
    e.in_character_score = detail::likert_field(item, "in_character_score", where, problems).value_or(0);
    e.entertaining_explanation = detail::explanation_field(item, "entertaining_explanation", where, problems);
    e.entertaining_score = detail::likert_field(item, "entertaining_score", where, problems).value_or(0);
    e.fluency_explanation = detail::explanation_field(item, "fluency_explanation", where, problems);
    e.fluency_score = detail::likert_field(item, "fluency_score", where, problems).value_or(0);
    verdict.evaluations.push_back(std::move(e));
  }
  for (int k = 1; k <= expected_turns; ++k)
    if (!seen.count(k)) problems.push_back("missing turn " + std::to_string(k));
  if (!problems.empty()) throw InvalidVerdict(std::move(problems));

  std::sort(verdict.evaluations.begin(), verdict.evaluations.end(),
            [](const auto& a, const auto& b) { return a.turn < b.turn; });
  return verdict;
}

inline std::string judge_role(const std::string& judge_model) { return "judge:" + judge_model; }

inline JudgeVerdict judge_transcript(const ChatClient& client, const RoleBinding& judge, const CharacterCard& card,
                                     const Transcript& transcript, std::vector<TelemetryRecord>* telemetry = nullptr,
                                     const PromptTemplates& templates = builtin_templates()) {
  if (!transcript.complete()) throw Error("refusing to judge incomplete conversation " + transcript.key.str());
  ChatRequest request{judge.model, {{"user", render_judge(card.system_prompt, transcript, templates)}}, judge.sampling};
  const CallContext ctx{judge_role(judge.model), transcript.key.str(), 0};
  const int turns = transcript.completed_turns;
  return client.call(
      judge, request, ctx,
      [&](const std::string& raw) { return parse_verdict(extract_json_payload(raw), turns, judge.model); }, telemetry);
}

struct PooledTurn {
  int turn = 0;
  double in_character = 0;
  double entertaining = 0;
  double fluency = 0;
  bool is_refusal = false;

  bool operator==(const PooledTurn&) const = default;
};

struct PooledScores {
  std::vector<PooledTurn> turns;
  bool is_refusal = false;  // any turn flagged

  bool operator==(const PooledScores&) const = default;
};

/// Per-turn arithmetic mean of each criterion across judges. A turn counts as a
/// refusal when any judge flags it.
inline PooledScores pool_judges(std::span<const JudgeVerdict> verdicts) {
  if (verdicts.empty()) throw ValidationError({"cannot pool zero verdicts"});
  const auto& first = verdicts.front().evaluations;
  for (const auto& v : verdicts) {
    bool same = v.evaluations.size() == first.size();
    for (std::size_t i = 0; same && i < first.size(); ++i) same = v.evaluations[i].turn == first[i].turn;
    if (!same) throw ValidationError({"verdicts of " + verdicts.front().judge_model + " and " + v.judge_model +
                                      " cover different turns"});
  }
  PooledScores out;
  const double n = static_cast<double>(verdicts.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    long ic = 0, ent = 0, flu = 0;
    bool refusal = false;
    for (const auto& v : verdicts) {
      const auto& e = v.evaluations[i];
      ic += e.in_character_score;
      ent += e.entertaining_score;
      flu += e.fluency_score;
      refusal = refusal || e.is_refusal;
    }
    out.turns.push_back({first[i].turn, static_cast<double>(ic) / n, static_cast<double>(ent) / n,
                         static_cast<double>(flu) / n, refusal});
    out.is_refusal = out.is_refusal || refusal;
  }
  return out;
}

enum class JudgingStatus { complete, partial_ensemble, excluded, not_judged };

inline std::string to_string(JudgingStatus s) {
  switch (s) {
    case JudgingStatus::complete: return "complete";
    case JudgingStatus::partial_ensemble: return "partial_ensemble";
    case JudgingStatus::excluded: return "excluded";
    case JudgingStatus::not_judged: return "not_judged";
  }
  return "unknown";
}

inline std::optional<JudgingStatus> parse_judging_status(const std::string& s) {
  for (auto st : {JudgingStatus::complete, JudgingStatus::partial_ensemble, JudgingStatus::excluded,
                  JudgingStatus::not_judged})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

struct VerdictFailure {
  std::string judge_model;
  std::string message;
  std::vector<std::string> attempts;

  bool operator==(const VerdictFailure&) const = default;
};

/// A conversation with its verdicts attached.
struct JudgedRecord {
  ConversationRecord conversation;
  JudgingStatus status = JudgingStatus::not_judged;
  std::vector<JudgeVerdict> verdicts;  // in judge configuration order
  std::vector<VerdictFailure> failures;
  std::optional<PooledScores> pooled;
  std::vector<TelemetryRecord> judge_telemetry;

  /// Counted in aggregation: at least one verdict pooled.
  bool usable() const { return pooled.has_value(); }

  bool operator==(const JudgedRecord&) const = default;
};

/// Judges complete transcripts with every judge and pools the verdicts, without
/// re-running any conversation. Incomplete transcripts are marked not_judged.
inline std::vector<JudgedRecord> rejudge(const ChatClient& client, std::span<const RoleBinding> judges,
                                         const AssetSet& assets, std::span<const ConversationRecord> records,
                                         int workers = 4, const PromptTemplates& templates = builtin_templates()) {
  if (judges.empty()) throw ValidationError({"at least one judge is required"});
  struct Slot {
    std::optional<JudgeVerdict> verdict;
    std::optional<VerdictFailure> failure;
    std::vector<TelemetryRecord> telemetry;
  };
  std::vector<JudgedRecord> out(records.size());
  std::vector<const CharacterCard*> cards(records.size(), nullptr);
  for (std::size_t i = 0; i < records.size(); ++i) {
    out[i].conversation = records[i];
    if (!records[i].transcript.complete()) continue;
    cards[i] = assets.find_character(records[i].transcript.key.character_id);
    if (!cards[i])
      throw ValidationError({"unknown character '" + records[i].transcript.key.character_id + "' in run artifact"});
  }

  const std::size_t tasks = records.size() * judges.size();
  std::vector<Slot> slots(tasks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t r = t / judges.size();
      const std::size_t j = t % judges.size();
      if (!cards[r]) continue;
      try {
        slots[t].verdict = judge_transcript(client, judges[j], *cards[r], records[r].transcript, &slots[t].telemetry,
                                            templates);
      } catch (const ProviderFailure& e) {
        slots[t].failure = VerdictFailure{judges[j].model, e.what(), e.attempts()};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), std::max<std::size_t>(tasks, 1));
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t r = 0; r < records.size(); ++r) {
    if (!cards[r]) continue;
    auto& rec = out[r];
    for (std::size_t j = 0; j < judges.size(); ++j) {
      auto& slot = slots[r * judges.size() + j];
      if (slot.verdict) rec.verdicts.push_back(std::move(*slot.verdict));
      if (slot.failure) rec.failures.push_back(std::move(*slot.failure));
      rec.judge_telemetry.insert(rec.judge_telemetry.end(), slot.telemetry.begin(), slot.telemetry.end());
    }
    if (rec.verdicts.empty()) {
      rec.status = JudgingStatus::excluded;
    } else {
      rec.pooled = pool_judges(rec.verdicts);
      rec.status = rec.failures.empty() ? JudgingStatus::complete : JudgingStatus::partial_ensemble;
    }
  }
  return out;
}

}  // namespace rolebench
