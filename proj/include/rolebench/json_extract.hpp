#pragma once

// Pulls the structured payload out of free-form model output. Models wrap JSON in
// code fences, prefix it with "The correct JSON:", or trail off with chatter; we
// only slice, never repair.

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rolebench/error.hpp"

namespace rolebench {

using Json = nlohmann::json;

namespace detail {

inline bool has_bracket(std::string_view s) { return s.find_first_of("{[") != std::string_view::npos; }

/// Contents of the first ``` fenced block that contains a bracket, if any.
inline std::optional<std::string_view> fenced_body(std::string_view raw) {
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = raw.find("```", pos);
    if (open == std::string_view::npos) return std::nullopt;
    std::size_t body = open + 3;
    while (body < raw.size() && (std::isalnum(static_cast<unsigned char>(raw[body])) || raw[body] == '_' ||
                                 raw[body] == '-')) {
      ++body;  // language tag
    }
    const std::size_t close = raw.find("```", body);
    const std::string_view inner =
        raw.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
    if (has_bracket(inner)) return inner;
    if (close == std::string_view::npos) return std::nullopt;
    pos = close + 3;
  }
}

/// First string-aware balanced span starting at `start`, or npos.
inline std::size_t balanced_end(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

}  // namespace detail

/// Parses the maximal bracket-delimited span of `raw` after stripping code fences.
/// Throws MalformedOutput when there is no span or the span does not parse.
inline Json extract_json_payload(std::string_view raw) {
  std::string_view text = raw;
  if (auto fenced = detail::fenced_body(raw)) text = *fenced;

  const std::size_t open = text.find_first_of("{[");
  if (open == std::string_view::npos) throw MalformedOutput("no JSON object found in model output");
  const char closer = text[open] == '{' ? '}' : ']';
  const std::size_t close = text.rfind(closer);
  if (close == std::string_view::npos || close < open) throw MalformedOutput("unterminated JSON object in model output");

  Json value = Json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (!value.is_discarded()) return value;

  // Trailing prose may itself contain brackets; fall back to the first balanced span.
  const std::size_t end = detail::balanced_end(text, open);
  if (end != std::string_view::npos && end != close) {
    value = Json::parse(text.substr(open, end - open + 1), nullptr, false);
    if (!value.is_discarded()) return value;
  }
  throw MalformedOutput("model output is not valid JSON");
}

}  // namespace rolebench
