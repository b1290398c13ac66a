#pragma once

// Role prompts. The default template texts below are kept byte-identical to
// templates/*.jinja; a run may point at another directory to override them.

#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>

#include "rolebench/assets.hpp"
#include "rolebench/error.hpp"
#include "rolebench/provider.hpp"
#include "rolebench/template.hpp"
#include "rolebench/transcript.hpp"

namespace rolebench {

namespace default_templates {

inline constexpr std::string_view player = R"tmpl({{character.char_name}}'s Persona: {{character.system_prompt}}
{% if character.example_prompt %}Example conversation:
{{character.example_prompt}}
{% endif %}
{% if character.initial_message %}Greeting:
{{character.initial_message}}
{% endif %}
Answer as {{character.char_name}}.
Don't make your answer too long. Never refuse to answer.
)tmpl";

inline constexpr std::string_view interrogator = R"tmpl(You are speaking with the following player: "{{char_summary}}"
You are not this character!
Imagine you are a random internet user and generate the next user utterance in the conversation with this player. You can use actions inside asterisks when appropriate.
Follow this situation description during the whole conversation:
"{{situation}}"
Return the result in JSON with the following format:
{"next_utterance": "..."}
Always return a correct JSON! Always escape double quotes in strings.
Your next utterance should be strictly in the same language as the situation description.
Conversation:
{% for m in messages %}
{% if m.role in ("assistant",) %}player{% else %}{{m.role}}{% endif %}: {{m.content}}
{% endfor %}
The correct JSON:
)tmpl";

inline constexpr std::string_view judge = R"tmpl(Please act as an impartial judge and evaluate the quality of the player's responses.
Try to be as objective as possible. Do not rate lengthy answers higher than short ones.
A player pretends to be the following character:
=====
{{char_description}}
=====
Evaluate the player's answers.
Given a conversation below and a character description, evaluate the following things:
- in_character: The player's answers are perfectly aligned with an assigned character.
They correspond to the character's description. There is nothing contradictory to the
character description.
- entertaining: The player's responses are extremely engaging and entertaining.
The player is not repeating phrases.
- fluency: The player's language use is of the highest quality, without any mistakes or errors.
The player is perfectly fluent. There is no awkward phrasing, and the player always uses the
correct word forms, word gender, cases, orthography, punctuation, etc. The player never
uses non-existing words or words in a language different from the character description.
Use the Likert scale with the following options:
- 1. Strongly disagree
- 2. Disagree
- 3. Neither agree nor disagree
- 4. Agree
- 5. Strongly agree
Do not evaluate answers marked as "user". Evaluate all player's answers, not only the last one. Evaluate every turn separately. Explain scores before setting them. Start explanations with quotes from the player's answers. Use single quotation marks for quotes. Focus on problems and mistakes. Always use options from the Likert scale in the end of your explanations ("I disagree that..."). Scores should correspond to these explanations. Do not evaluate whether the player is rude or violent. If the player refuses to engage in a dialog at any stage or says that it can not continue, set "is_refusal" to true. Return the result in JSON with the following format:
{
 "scores": [{
  "turn": 1,
  "is_refusal_explanation": "...",
  "is_refusal": false,
  "in_character_explanation": "...",
  "in_character_score": 3,
  "entertaining_explanation": "...",
  "entertaining_score": 3,
  "fluency_explanation": "...",
  "fluency_score": 1
 }, ...]
}
Always return a correct JSON! Escape double quotes in strings if needed.
Conversation:
{% for m in messages %}
{% if m.opens_turn %}
Turn {{m.turn}}:
{% endif %}{{m.role}}: {{m.content.strip()}}
{% endfor %}
The correct JSON:
)tmpl";

}  // namespace default_templates

struct PromptTemplates {
  tmpl::Template player{default_templates::player, "player"};
  tmpl::Template interrogator{default_templates::interrogator, "interrogator"};
  tmpl::Template judge{default_templates::judge, "judge"};

  /// Reads player.jinja, interrogator.jinja and judge.jinja from `dir`; missing
  /// files fall back to the defaults.
  static PromptTemplates load(const std::filesystem::path& dir) {
    PromptTemplates out;
    auto read = [&dir](const char* name, tmpl::Template& slot) {
      const auto path = dir / (std::string(name) + ".jinja");
      if (!std::filesystem::exists(path)) return;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw IoError("cannot read " + path.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      slot = tmpl::Template(buf.str(), path.string());
    };
    read("player", out.player);
    read("interrogator", out.interrogator);
    read("judge", out.judge);
    return out;
  }
};

inline const PromptTemplates& builtin_templates() {
  static const PromptTemplates templates;
  return templates;
}

inline tmpl::Value optional_value(const std::optional<std::string>& s) {
  return s ? tmpl::Value(*s) : tmpl::Value();
}

/// System prompt for the player: persona, optional example dialogue and greeting.
inline std::string render_player(const CharacterCard& card, const PromptTemplates& templates = builtin_templates()) {
  if (card.char_name.empty() || card.system_prompt.empty())
    throw ValidationError({"character '" + card.id + "' lacks char_name or system_prompt"});
  tmpl::Map character{{"char_name", card.char_name},
                      {"system_prompt", card.system_prompt},
                      {"example_prompt", optional_value(card.example_prompt)},
                      {"initial_message", optional_value(card.initial_message)}};
  return templates.player.render(tmpl::Map{{"character", tmpl::Value(std::move(character))}});
}

/// User prompt for the interrogator. It sees the character summary and the
/// situation, never the full persona.
inline std::string render_interrogator(const std::string& summary, const Situation& situation,
                                       std::span<const ChatMessage> messages,
                                       const PromptTemplates& templates = builtin_templates()) {
  if (summary.empty() || situation.text.empty())
    throw TemplateError("interrogator prompt needs a non-empty summary and situation");
  tmpl::List rendered;
  for (const auto& m : messages) rendered.push_back(tmpl::Map{{"role", m.role}, {"content", m.content}});
  return templates.interrogator.render(tmpl::Map{{"char_summary", summary},
                                                 {"situation", situation.text},
                                                 {"messages", tmpl::Value(std::move(rendered))}});
}

/// User prompt for a judge. A "Turn k:" header opens every user message; a
/// leading greeting is folded into the first turn.
inline std::string render_judge(const std::string& char_description, std::span<const ChatMessage> messages,
                                const PromptTemplates& templates = builtin_templates()) {
  bool any_turn = false;
  for (std::size_t i = 1; i < messages.size(); ++i)
    if (messages[i - 1].role == "user" && messages[i].role == "assistant") any_turn = true;
  if (!any_turn) throw ValidationError({"transcript has no completed turn to judge"});

  const bool greeting = messages.front().role == "assistant";
  tmpl::List rendered;
  int turn = 0;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& m = messages[i];
    bool opens = false;
    if (m.role == "user") {
      ++turn;
      opens = !(greeting && turn == 1);
    } else if (greeting && i == 0) {
      opens = true;
    }
    rendered.push_back(tmpl::Map{{"role", m.role == "assistant" ? std::string("player") : m.role},
                                 {"content", m.content},
                                 {"turn", tmpl::Value(greeting && i == 0 ? 1 : turn)},
                                 {"opens_turn", tmpl::Value(opens)}});
  }
  return templates.judge.render(
      tmpl::Map{{"char_description", char_description}, {"messages", tmpl::Value(std::move(rendered))}});
}

inline std::string render_interrogator(const std::string& summary, const Situation& situation,
                                       const Transcript& transcript,
                                       const PromptTemplates& templates = builtin_templates()) {
  return render_interrogator(summary, situation, std::span<const ChatMessage>(transcript.messages), templates);
}

inline std::string render_judge(const std::string& char_description, const Transcript& transcript,
                                const PromptTemplates& templates = builtin_templates()) {
  return render_judge(char_description, std::span<const ChatMessage>(transcript.messages), templates);
}

}  // namespace rolebench
