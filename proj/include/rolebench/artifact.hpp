#pragma once

// Line-delimited run artifacts. A run artifact holds one ConversationRecord per
// line; a judged artifact additionally carries a "judging" object.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolebench/error.hpp"
#include "rolebench/judging.hpp"
#include "rolebench/orchestrator.hpp"

namespace rolebench {

inline Json to_json(const ConversationRecord& r) {
  Json telemetry = Json::array();
  for (const auto& t : r.telemetry) telemetry.push_back(to_json(t));
  return {{"key", r.transcript.key.str()},
          {"language", to_string(r.language)},
          {"transcript", to_json(r.transcript)},
          {"telemetry", std::move(telemetry)}};
}

inline ConversationRecord conversation_from_json(const Json& j) {
  ConversationRecord r;
  r.transcript = transcript_from_json(j.at("transcript"));
  const auto lang = parse_language(j.at("language").get<std::string>());
  if (!lang) throw Error("unknown language " + j.at("language").dump());
  r.language = *lang;
  for (const auto& t : j.at("telemetry")) r.telemetry.push_back(telemetry_from_json(t));
  return r;
}

inline Json to_json(const TurnEvaluation& e) {
  return {{"turn", e.turn},
          {"is_refusal_explanation", e.is_refusal_explanation},
          {"is_refusal", e.is_refusal},
          {"in_character_explanation", e.in_character_explanation},
          {"in_character_score", e.in_character_score},
          {"entertaining_explanation", e.entertaining_explanation},
          {"entertaining_score", e.entertaining_score},
          {"fluency_explanation", e.fluency_explanation},
          {"fluency_score", e.fluency_score}};
}

inline Json to_json(const JudgeVerdict& v) {
  Json scores = Json::array();
  for (const auto& e : v.evaluations) scores.push_back(to_json(e));
  return {{"judge_model", v.judge_model}, {"scores", std::move(scores)}};
}

inline Json to_json(const PooledScores& p) {
  Json turns = Json::array();
  for (const auto& t : p.turns)
    turns.push_back({{"turn", t.turn},
                     {"in_character", t.in_character},
                     {"entertaining", t.entertaining},
                     {"fluency", t.fluency},
                     {"is_refusal", t.is_refusal}});
  return {{"turns", std::move(turns)}, {"is_refusal", p.is_refusal}};
}

inline Json to_json(const JudgedRecord& r) {
  Json j = to_json(r.conversation);
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
  Json failures = Json::array();
  for (const auto& f : r.failures)
    failures.push_back({{"judge_model", f.judge_model}, {"message", f.message}, {"attempts", f.attempts}});
  Json telemetry = Json::array();
  for (const auto& t : r.judge_telemetry) telemetry.push_back(to_json(t));
  j["judging"] = {{"status", to_string(r.status)},
                  {"verdicts", std::move(verdicts)},
                  {"failures", std::move(failures)},
                  {"pooled", r.pooled ? to_json(*r.pooled) : Json(nullptr)},
                  {"telemetry", std::move(telemetry)}};
  return j;
}

inline JudgedRecord judged_from_json(const Json& j) {
  JudgedRecord r;
  r.conversation = conversation_from_json(j);
  const Json& judging = j.at("judging");
  const auto status = parse_judging_status(judging.at("status").get<std::string>());
  if (!status) throw Error("unknown judging status " + judging.at("status").dump());
  r.status = *status;
  for (const auto& v : judging.at("verdicts")) {
    // Persisted verdicts were validated when they were produced; re-validate anyway.
    r.verdicts.push_back(parse_verdict(v, r.conversation.transcript.completed_turns, v.at("judge_model").get<std::string>()));
  }
  for (const auto& f : judging.at("failures"))
    r.failures.push_back({f.at("judge_model").get<std::string>(), f.at("message").get<std::string>(),
                          f.at("attempts").get<std::vector<std::string>>()});
  if (!judging.at("pooled").is_null()) {
    PooledScores p;
    p.is_refusal = judging["pooled"].at("is_refusal").get<bool>();
    for (const auto& t : judging["pooled"].at("turns"))
      p.turns.push_back({t.at("turn").get<int>(), t.at("in_character").get<double>(),
                         t.at("entertaining").get<double>(), t.at("fluency").get<double>(),
                         t.at("is_refusal").get<bool>()});
    r.pooled = std::move(p);
  }
  if (judging.contains("telemetry"))
    for (const auto& t : judging["telemetry"]) r.judge_telemetry.push_back(telemetry_from_json(t));
  return r;
}

template <typename Record>
void write_jsonl(const std::filesystem::path& path, const std::vector<Record>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw IoError("write to " + path.string() + " failed");
}

template <typename Parse>
auto read_jsonl(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<decltype(parse(std::declval<const Json&>()))> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(path.string(), lineno, "not valid JSON");
    try {
      out.push_back(parse(j));
    } catch (const Json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    } catch (const MalformedOutput& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return out;
}

inline std::vector<ConversationRecord> read_run_artifact(const std::filesystem::path& path) {
  return read_jsonl(path, conversation_from_json);
}

inline std::vector<JudgedRecord> read_judged_artifact(const std::filesystem::path& path) {
  return read_jsonl(path, judged_from_json);
}

}  // namespace rolebench
