#pragma once

// Characters, situations and the evaluation matrix.
//
// Layout of a suite directory:
//   <suite>/characters/<id>.yaml
//   <suite>/situations/<id>.yaml

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rolebench/config.hpp"
#include "rolebench/error.hpp"

namespace rolebench {

enum class Language { en, ru };

inline std::string to_string(Language lang) { return lang == Language::en ? "en" : "ru"; }

inline std::optional<Language> parse_language(const std::string& s) {
  if (s == "en") return Language::en;
  if (s == "ru") return Language::ru;
  return std::nullopt;
}

struct CharacterCard {
  std::string id;
  std::string char_name;
  std::string system_prompt;
  std::optional<std::string> example_prompt;
  std::optional<std::string> initial_message;
  std::string char_summary;
  Language language = Language::en;

  bool operator==(const CharacterCard&) const = default;
};

inline constexpr int kMaxTurnBudget = 16;

struct Situation {
  std::string id;
  std::string text;
  int turn_budget = 1;
  Language language = Language::en;

  bool operator==(const Situation&) const = default;
};

/// Characters and situations, each sorted by id.
struct AssetSet {
  std::vector<CharacterCard> characters;
  std::vector<Situation> situations;

  Language language() const {
    if (!characters.empty()) return characters.front().language;
    return situations.empty() ? Language::en : situations.front().language;
  }

  const CharacterCard* find_character(const std::string& id) const {
    auto it = std::lower_bound(characters.begin(), characters.end(), id,
                               [](const CharacterCard& c, const std::string& key) { return c.id < key; });
    return it != characters.end() && it->id == id ? &*it : nullptr;
  }

  const Situation* find_situation(const std::string& id) const {
    auto it = std::lower_bound(situations.begin(), situations.end(), id,
                               [](const Situation& s, const std::string& key) { return s.id < key; });
    return it != situations.end() && it->id == id ? &*it : nullptr;
  }

  bool operator==(const AssetSet&) const = default;
};

struct SuiteConfig {
  AssetSet assets;
  RunConfig run;

  bool operator==(const SuiteConfig&) const = default;
};

namespace detail {

inline std::string trimmed(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::optional<std::string> optional_text(const YAML::Node& node, const char* field,
                                                const std::filesystem::path& path) {
  if (!node[field] || node[field].IsNull()) return std::nullopt;
  auto value = trimmed(yaml_as<std::string>(node[field], path, field));
  if (value.empty()) return std::nullopt;
  return value;
}

inline std::string required_text(const YAML::Node& node, const char* field, const std::filesystem::path& path,
                                 std::vector<std::string>& problems) {
  if (!node[field] || node[field].IsNull()) {
    problems.push_back(path.string() + ": missing field " + field);
    return {};
  }
  auto value = trimmed(yaml_as<std::string>(node[field], path, field));
  if (value.empty()) problems.push_back(path.string() + ": field " + field + " is empty");
  return value;
}

inline Language read_language(const YAML::Node& node, const std::filesystem::path& path,
                              std::vector<std::string>& problems) {
  if (!node["language"]) {
    problems.push_back(path.string() + ": missing field language");
    return Language::en;
  }
  const auto raw = yaml_as<std::string>(node["language"], path, "language");
  if (auto lang = parse_language(raw)) return *lang;
  problems.push_back(path.string() + ": language must be 'en' or 'ru', got '" + raw + "'");
  return Language::en;
}

inline CharacterCard read_character(const std::filesystem::path& path, std::vector<std::string>& problems) {
  const YAML::Node node = load_yaml_file(path);
  if (!node.IsMap()) throw ParseError(path.string(), 1, "character file must be a map");
  CharacterCard card;
  card.id = node["id"] ? yaml_as<std::string>(node["id"], path, "id") : path.stem().string();
  card.char_name = required_text(node, "char_name", path, problems);
  card.system_prompt = required_text(node, "system_prompt", path, problems);
  card.example_prompt = optional_text(node, "example_prompt", path);
  card.initial_message = optional_text(node, "initial_message", path);
  card.char_summary = required_text(node, "char_summary", path, problems);
  card.language = read_language(node, path, problems);
  if (!card.char_summary.empty() && !card.system_prompt.empty() &&
      card.char_summary.size() >= card.system_prompt.size()) {
    problems.push_back(path.string() + ": char_summary must be shorter than system_prompt");
  }
  return card;
}

inline Situation read_situation(const std::filesystem::path& path, std::vector<std::string>& problems) {
  const YAML::Node node = load_yaml_file(path);
  if (!node.IsMap()) throw ParseError(path.string(), 1, "situation file must be a map");
  Situation s;
  s.id = node["id"] ? yaml_as<std::string>(node["id"], path, "id") : path.stem().string();
  s.text = required_text(node, "text", path, problems);
  if (!node["turn_budget"]) {
    problems.push_back(path.string() + ": missing field turn_budget");
  } else {
    s.turn_budget = yaml_as<int>(node["turn_budget"], path, "turn_budget");
    if (s.turn_budget < 1 || s.turn_budget > kMaxTurnBudget)
      problems.push_back(path.string() + ": turn_budget must lie in [1, " + std::to_string(kMaxTurnBudget) + "]");
  }
  s.language = read_language(node, path, problems);
  return s;
}

inline std::vector<std::filesystem::path> yaml_files_in(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".yaml" || ext == ".yml")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Loads and validates explicit character and situation files.
inline AssetSet load_assets(std::span<const std::filesystem::path> character_files,
                            std::span<const std::filesystem::path> situation_files) {
  std::vector<std::string> problems;
  AssetSet set;
  for (const auto& path : character_files) set.characters.push_back(detail::read_character(path, problems));
  for (const auto& path : situation_files) set.situations.push_back(detail::read_situation(path, problems));

  std::stable_sort(set.characters.begin(), set.characters.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::stable_sort(set.situations.begin(), set.situations.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < set.characters.size(); ++i)
    if (set.characters[i].id == set.characters[i - 1].id)
      problems.push_back("duplicate character id '" + set.characters[i].id + "'");
  for (std::size_t i = 1; i < set.situations.size(); ++i)
    if (set.situations[i].id == set.situations[i - 1].id)
      problems.push_back("duplicate situation id '" + set.situations[i].id + "'");

  if (set.characters.empty()) problems.push_back("suite has no characters");
  if (set.situations.empty()) problems.push_back("suite has no situations");

  std::set<Language> languages;
  for (const auto& c : set.characters) languages.insert(c.language);
  for (const auto& s : set.situations) languages.insert(s.language);
  if (languages.size() > 1) problems.push_back("suite mixes languages; every asset of a run must share one language");

  if (!problems.empty()) throw ValidationError(std::move(problems));
  return set;
}

/// Loads `<dir>/characters/*.yaml` and `<dir>/situations/*.yaml`.
inline AssetSet load_assets(const std::filesystem::path& suite_dir) {
  const auto characters = detail::yaml_files_in(suite_dir / "characters");
  const auto situations = detail::yaml_files_in(suite_dir / "situations");
  return load_assets(characters, situations);
}

inline SuiteConfig load_suite(const std::filesystem::path& suite_dir, const std::filesystem::path& config_file) {
  return SuiteConfig{load_assets(suite_dir), load_run_config(config_file)};
}

using MatrixPair = std::pair<const CharacterCard*, const Situation*>;

/// Cartesian product in (character id, situation id) order.
inline std::vector<MatrixPair> matrix(const AssetSet& assets) {
  std::vector<MatrixPair> out;
  out.reserve(assets.characters.size() * assets.situations.size());
  for (const auto& c : assets.characters)
    for (const auto& s : assets.situations) out.emplace_back(&c, &s);
  return out;
}

inline std::vector<MatrixPair> matrix(const SuiteConfig& suite) { return matrix(suite.assets); }

/// FNV-1a over the asset contents; recorded in report metadata.
inline std::string fingerprint(const AssetSet& assets) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  for (const auto& c : assets.characters) {
    mix(c.id);
    mix(c.char_name);
    mix(c.system_prompt);
    mix(c.example_prompt.value_or(""));
    mix(c.initial_message.value_or(""));
    mix(c.char_summary);
    mix(to_string(c.language));
  }
  for (const auto& s : assets.situations) {
    mix(s.id);
    mix(s.text);
    mix(std::to_string(s.turn_budget));
    mix(to_string(s.language));
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

}  // namespace rolebench
