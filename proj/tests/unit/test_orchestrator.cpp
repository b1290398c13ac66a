#include <catch_amalgamated.hpp>

#include "rolebench/artifact.hpp"
#include "rolebench/orchestrator.hpp"
#include "scripted_fixture.hpp"
#include "scripted_run.hpp"
#include "test_util.hpp"

using namespace rolebench;

namespace {

const AssetSet& suite() {
  static const AssetSet assets = load_assets(testutil::fixtures() / "suite");
  return assets;
}

RoleBinding binding(const std::string& provider, const std::string& model, bool system_prompt = true) {
  return {provider, model, {}, system_prompt};
}

struct Rig {
  std::shared_ptr<ScriptedProvider> inter = std::make_shared<ScriptedProvider>();
  std::shared_ptr<ScriptedProvider> player = std::make_shared<ScriptedProvider>();
  ChatClient client;
  ConversationRoles roles{binding("p", "pm"), binding("i", "im")};

  Rig() : client(make_registry(), RetryPolicy{3, std::chrono::milliseconds(0), 2.0}, [](auto) {}) {}

  std::shared_ptr<ProviderRegistry> make_registry() {
    auto r = std::make_shared<ProviderRegistry>();
    r->add("i", inter);
    r->add("p", player);
    return r;
  }

  void script(const std::string& key, int turns) {
    for (int s = 0; s < turns; ++s) {
      inter->add("interrogator", key, s, R"({"next_utterance": "q)" + std::to_string(s) + "\"}");
      player->add("player", key, s, "a" + std::to_string(s));
    }
  }
};

}  // namespace

TEST_CASE("interrogator output is parsed from plain, fenced and wrapped JSON") {
  CHECK(parse_next_utterance(R"({"next_utterance": "hi"})") == "hi");
  CHECK(parse_next_utterance("```json\n{\"next_utterance\": \"hi\"}\n```") == "hi");
  CHECK(parse_next_utterance("Sure:\n{\"next_utterance\": \"hi\"} done") == "hi");
  CHECK_THROWS_AS(parse_next_utterance("no json here"), MalformedOutput);
  CHECK_THROWS_AS(parse_next_utterance(R"({"utterance": "hi"})"), MalformedOutput);
  CHECK_THROWS_AS(parse_next_utterance(R"({"next_utterance": 3})"), MalformedOutput);
}

TEST_CASE("a conversation runs exactly its turn budget") {
  Rig rig;
  const auto& card = *suite().find_character("captain_vey");
  const auto& sit = *suite().find_situation("complaint");
  rig.script("pm/captain_vey/complaint", 5);
  const auto rec = run_conversation(rig.client, rig.roles, card, sit);
  const auto& t = rec.transcript;
  CHECK(t.complete());
  CHECK(t.completed_turns == 5);
  REQUIRE(t.messages.size() == 10);
  CHECK(t.messages[0] == ChatMessage{"user", "q0"});
  CHECK(t.messages[9] == ChatMessage{"assistant", "a4"});
  CHECK_FALSE(alternation_violation(t));
  CHECK(rec.telemetry.size() == 10);
  CHECK(rec.telemetry[0].role == "interrogator");
  CHECK(rec.telemetry[1].role == "player");
  CHECK(rig.inter->remaining() == 0);
}

TEST_CASE("the greeting opens the transcript and is seen by both sides") {
  Rig rig;
  const auto& card = *suite().find_character("kestrel");
  const auto& sit = *suite().find_situation("ask_directions");
  rig.script("pm/kestrel/ask_directions", 4);
  const auto rec = run_conversation(rig.client, rig.roles, card, sit);
  const auto& t = rec.transcript;
  REQUIRE(t.has_greeting());
  CHECK(t.messages.front() == ChatMessage{"assistant", *card.initial_message});
  CHECK(t.messages.size() == 9);
  CHECK(t.player_replies().size() == 4);
  CHECK_FALSE(alternation_violation(t));

  const auto log = rig.inter->requests();
  REQUIRE_FALSE(log.empty());
  CHECK(log[0].request.messages[0].content.find("player: " + *card.initial_message) != std::string::npos);
  const auto plog = rig.player->requests();
  REQUIRE(plog[0].request.messages.size() == 3);
  CHECK(plog[0].request.messages[0].role == "system");
  CHECK(plog[0].request.messages[1].role == "assistant");
}

TEST_CASE("models without a system role get the prompt folded into the first user message") {
  Transcript t;
  t.messages = {{"assistant", "greet"}, {"user", "q"}, {"assistant", "a"}, {"user", "q2"}};
  const auto with = player_messages("SYS", t, true);
  REQUIRE(with.size() == 5);
  CHECK(with[0] == ChatMessage{"system", "SYS"});
  const auto folded = player_messages("SYS", t, false);
  REQUIRE(folded.size() == 4);
  CHECK(folded[0] == ChatMessage{"assistant", "greet"});
  CHECK(folded[1] == ChatMessage{"user", "SYS\n\nq"});
  CHECK(folded[3] == ChatMessage{"user", "q2"});
}

TEST_CASE("a refusal is an ordinary reply and does not end the conversation") {
  Rig rig;
  const auto& card = *suite().find_character("dr_okafor");
  const auto& sit = *suite().find_situation("homework_help");
  for (int s = 0; s < 4; ++s)
    rig.inter->add("interrogator", "pm/dr_okafor/homework_help", s, R"({"next_utterance": "q"})");
  auto player = std::make_shared<ScriptedProvider>();
  for (int s = 0; s < 4; ++s)
    player->add("player", "pm/dr_okafor/homework_help", s, s == 1 ? "I cannot help with that." : "fine");
  auto reg = std::make_shared<ProviderRegistry>();
  reg->add("i", rig.inter);
  reg->add("p", player);
  const ChatClient client(reg, RetryPolicy{1, std::chrono::milliseconds(0), 2}, [](auto) {});
  const auto rec = run_conversation(client, rig.roles, card, sit);
  CHECK(rec.transcript.complete());
  CHECK(rec.transcript.messages[3].content == "I cannot help with that.");
}

TEST_CASE("provider failures are recorded with role, step and attempts") {
  Rig rig;
  const auto& card = *suite().find_character("dr_okafor");
  const auto& sit = *suite().find_situation("complaint");
  const std::string key = "pm/dr_okafor/complaint";
  rig.script(key, 2);
  rig.inter->add("interrogator", key, 2, R"({"next_utterance": "q2"})");
  const auto rec = run_conversation(rig.client, rig.roles, card, sit);
  const auto& t = rec.transcript;
  REQUIRE(t.failure);
  CHECK(t.failure->role == "player");
  CHECK(t.failure->step == 2);
  CHECK(t.completed_turns == 2);
  CHECK_FALSE(t.complete());
  CHECK(t.messages.back().role == "user");
  CHECK_FALSE(t.failure->attempts.empty());
  REQUIRE_FALSE(rec.telemetry.empty());
  CHECK(rec.telemetry.back().error.has_value());

  Rig inter_fail;
  for (int a = 0; a < 3; ++a) inter_fail.inter->add("interrogator", key, 0, "not json at all");
  const auto rec2 = run_conversation(inter_fail.client, inter_fail.roles, card, sit);
  REQUIRE(rec2.transcript.failure);
  CHECK(rec2.transcript.failure->role == "interrogator");
  CHECK(rec2.transcript.failure->attempts.size() == 3);
  CHECK(rec2.transcript.messages.empty());
}

TEST_CASE("malformed interrogator output is re-asked") {
  Rig rig;
  const auto& card = *suite().find_character("dr_okafor");
  const auto& sit = *suite().find_situation("ask_directions");
  const std::string key = "pm/dr_okafor/ask_directions";
  rig.inter->add("interrogator", key, 0, "Let me think about it.");
  rig.script(key, 4);
  const auto rec = run_conversation(rig.client, rig.roles, card, sit);
  CHECK(rec.transcript.complete());
  CHECK(rec.telemetry[0].attempts == 2);
}

TEST_CASE("matrix run on the scripted suite") {
  const auto run = fixture::run_scripted_suite(4, false);
  REQUIRE(run.runs.size() == 2);
  for (const auto& m : run.runs) {
    CHECK(m.ok);
    CHECK(m.failed == 0);
    REQUIRE(m.records.size() == 64);
    int turns = 0;
    for (const auto& r : m.records) {
      CHECK_FALSE(alternation_violation(r.transcript));
      CHECK(r.transcript.complete());
      turns += r.transcript.completed_turns;
    }
    CHECK(turns == 288);
    CHECK(m.records[0].transcript.key.character_id == "ada_brennan");
    CHECK(m.records[0].transcript.key.situation_id == "ask_directions");
    CHECK(m.records[63].transcript.key.character_id == "pip_tinker");
  }
  // The queued malformed interrogator output forced a second attempt.
  CHECK(run.runs[0].records[0].telemetry[2].attempts == 2);
}

TEST_CASE("matrix output does not depend on the worker count") {
  const auto one = fixture::run_scripted_suite(1, false);
  const auto eight = fixture::run_scripted_suite(8, false);
  for (std::size_t p = 0; p < one.runs.size(); ++p) {
    testutil::TempDir dir;
    write_jsonl(dir / "a.jsonl", one.runs[p].records);
    write_jsonl(dir / "b.jsonl", eight.runs[p].records);
    CHECK(testutil::slurp(dir / "a.jsonl") == testutil::slurp(dir / "b.jsonl"));
  }
}

TEST_CASE("too many failed conversations mark the run as not ok") {
  auto inter = std::make_shared<ScriptedProvider>();
  auto player = std::make_shared<ScriptedProvider>();
  auto reg = std::make_shared<ProviderRegistry>();
  reg->add("i", inter);
  reg->add("p", player);
  const ChatClient client(reg, RetryPolicy{1, std::chrono::milliseconds(0), 2}, [](auto) {});
  const ConversationRoles roles{binding("p", "pm"), binding("i", "im")};
  const auto run = run_matrix(client, roles, suite(), {2, 0.2});
  CHECK(run.failed == 64);
  CHECK_FALSE(run.ok);
  CHECK(run.records.size() == 64);
}

TEST_CASE("shipped scripted fixtures match the generator") {
  const auto script = fixture::build_script(suite());
  const auto dir = testutil::fixtures() / "scripted";
  CHECK(testutil::slurp(dir / "interrogator.jsonl") == fixture::to_jsonl(script.interrogator));
  CHECK(testutil::slurp(dir / "player.jsonl") == fixture::to_jsonl(script.player));
  CHECK(testutil::slurp(dir / "judges.jsonl") == fixture::to_jsonl(script.judges));
}

TEST_CASE("run artifact round-trips") {
  const auto run = fixture::run_scripted_suite(4, false);
  testutil::TempDir dir;
  write_jsonl(dir / "run.jsonl", run.runs[1].records);
  const auto back = read_run_artifact(dir / "run.jsonl");
  CHECK(back == run.runs[1].records);
}
