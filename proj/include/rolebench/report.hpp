#pragma once

// Leaderboards and analysis tables: JSON, markdown and a static HTML bundle.
// Everything here formats persisted numbers; nothing is recomputed.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolebench/analytics.hpp"
#include "rolebench/artifact.hpp"
#include "rolebench/csv.hpp"
#include "rolebench/error.hpp"

namespace rolebench {

struct BoardMetadata {
  std::string suite_fingerprint;
  std::string interrogator;
  std::vector<std::string> judges;
  PenaltyParams penalty;
  int global_median = 0;
  std::uint64_t seed = 0;
  int n_boot = 0;
  std::string timestamp;

  bool operator==(const BoardMetadata&) const = default;
};

/// Output of `aggregate`, input of `board`.
struct MetricsReport {
  BoardMetadata metadata;
  std::vector<ModelMetrics> models;

  bool operator==(const MetricsReport&) const = default;
};

struct Leaderboard {
  Language language = Language::en;
  std::vector<ModelMetrics> rows;
  BoardMetadata metadata;
};

/// Rows by LN score descending, then agg descending, then model name.
inline Leaderboard build_leaderboard(std::vector<ModelMetrics> metrics, BoardMetadata metadata = {}) {
  if (metrics.empty()) throw ValidationError({"leaderboard needs at least one model"});
  for (const auto& m : metrics)
    if (m.language != metrics.front().language)
      throw ValidationError({"leaderboard mixes languages: " + m.model + " is " + to_string(m.language) + ", " +
                             metrics.front().model + " is " + to_string(metrics.front().language)});
  std::sort(metrics.begin(), metrics.end(), [](const ModelMetrics& a, const ModelMetrics& b) {
    if (a.ln_score != b.ln_score) return a.ln_score > b.ln_score;
    if (a.agg_score != b.agg_score) return a.agg_score > b.agg_score;
    return a.model < b.model;
  });
  const auto lang = metrics.front().language;
  return {lang, std::move(metrics), std::move(metadata)};
}

// ---------------------------------------------------------------- JSON

inline Json to_json(const BoardMetadata& m) {
  return {{"suite_fingerprint", m.suite_fingerprint},
          {"interrogator", m.interrogator},
          {"judges", m.judges},
          {"penalty", {{"coefficient", m.penalty.coefficient}, {"cap", m.penalty.cap}, {"global_median", m.global_median}}},
          {"seed", m.seed},
          {"n_boot", m.n_boot},
          {"timestamp", m.timestamp}};
}

inline BoardMetadata metadata_from_json(const Json& j) {
  BoardMetadata m;
  m.suite_fingerprint = j.at("suite_fingerprint").get<std::string>();
  m.interrogator = j.at("interrogator").get<std::string>();
  m.judges = j.at("judges").get<std::vector<std::string>>();
  m.penalty = {j.at("penalty").at("coefficient").get<double>(), j.at("penalty").at("cap").get<double>()};
  m.global_median = j.at("penalty").at("global_median").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_boot = j.at("n_boot").get<int>();
  m.timestamp = j.at("timestamp").get<std::string>();
  return m;
}

inline Json to_json(const ModelMetrics& m) {
  return {{"model", m.model},
          {"language", to_string(m.language)},
          {"conversations", m.conversations},
          {"turns", m.turns},
          {"in_character", m.mean_in_character},
          {"entertaining", m.mean_entertaining},
          {"fluency", m.mean_fluency},
          {"refusal_ratio", m.refusal_ratio},
          {"agg_score", m.agg_score},
          {"median_length", m.median_length},
          {"ln_score", m.ln_score},
          {"ci95", {m.ci95.lo, m.ci95.hi}}};
}

inline ModelMetrics metrics_from_json(const Json& j) {
  ModelMetrics m;
  m.model = j.at("model").get<std::string>();
  const auto lang = parse_language(j.at("language").get<std::string>());
  if (!lang) throw Error("unknown language " + j.at("language").dump());
  m.language = *lang;
  m.conversations = j.at("conversations").get<std::size_t>();
  m.turns = j.at("turns").get<std::size_t>();
  m.mean_in_character = j.at("in_character").get<double>();
  m.mean_entertaining = j.at("entertaining").get<double>();
  m.mean_fluency = j.at("fluency").get<double>();
  m.refusal_ratio = j.at("refusal_ratio").get<double>();
  m.agg_score = j.at("agg_score").get<double>();
  m.median_length = j.at("median_length").get<int>();
  m.ln_score = j.at("ln_score").get<double>();
  m.ci95 = {j.at("ci95").at(0).get<double>(), j.at("ci95").at(1).get<double>()};
  return m;
}

inline Json to_json(const MetricsReport& r) {
  Json models = Json::array();
  for (const auto& m : r.models) models.push_back(to_json(m));
  return {{"metadata", to_json(r.metadata)}, {"models", std::move(models)}};
}

inline Json to_json(const Leaderboard& b) {
  Json rows = Json::array();
  for (const auto& m : b.rows) rows.push_back(to_json(m));
  return {{"language", to_string(b.language)}, {"metadata", to_json(b.metadata)}, {"rows", std::move(rows)}};
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_metrics_report(const std::filesystem::path& path, const MetricsReport& report) {
  write_text(path, to_json(report).dump(2) + "\n");
}

inline MetricsReport read_metrics_report(const std::filesystem::path& path) {
  const Json j = Json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string(), 1, "not valid JSON");
  try {
    MetricsReport r;
    r.metadata = metadata_from_json(j.at("metadata"));
    for (const auto& m : j.at("models")) r.models.push_back(metrics_from_json(m));
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

/// Published-style rows. Columns: model, ln, ci, refusal_ratio, in_character,
/// fluency, entertaining, agg, length (ci is the half-width of the interval).
inline std::vector<ModelMetrics> load_metrics_table_csv(const std::filesystem::path& path, Language language) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ParseError(path.string(), 1, "empty table");
  const std::string origin = path.string();
  const auto& h = rows[0];
  const auto model = csv::column(h, "model", origin), ln = csv::column(h, "ln", origin), ci = csv::column(h, "ci", origin),
             ref = csv::column(h, "refusal_ratio", origin), ic = csv::column(h, "in_character", origin),
             flu = csv::column(h, "fluency", origin), ent = csv::column(h, "entertaining", origin),
             agg = csv::column(h, "agg", origin), len = csv::column(h, "length", origin);
  std::vector<ModelMetrics> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    const auto line = rows[i].line;
    if (f.size() != h.fields.size()) throw ParseError(origin, line, "wrong number of fields");
    ModelMetrics m;
    m.model = f[model];
    m.language = language;
    m.ln_score = csv::to_double(f[ln], origin, line);
    const double half = csv::to_double(f[ci], origin, line);
    m.ci95 = {m.ln_score - half, m.ln_score + half};
    m.refusal_ratio = csv::to_double(f[ref], origin, line);
    m.mean_in_character = csv::to_double(f[ic], origin, line);
    m.mean_fluency = csv::to_double(f[flu], origin, line);
    m.mean_entertaining = csv::to_double(f[ent], origin, line);
    m.agg_score = csv::to_double(f[agg], origin, line);
    m.median_length = static_cast<int>(csv::to_double(f[len], origin, line));
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------- markdown

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0.00" || s == "-0.000" || s == "-0.0") s.erase(0, 1);
  return s;
}

inline std::string markdown_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

inline std::string to_markdown(const Leaderboard& b) {
  std::ostringstream out;
  out << "| Model name | LN score | Agg. | Ref. ratio | Char. | Fluency | Ent. | Length |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& m : b.rows) {
    out << "| " << markdown_cell(m.model) << " | " << fixed(m.ln_score) << " ± " << fixed(m.ci95.width() / 2) << " | "
        << fixed(m.agg_score) << " | " << fixed(m.refusal_ratio) << " | " << fixed(m.mean_in_character) << " | "
        << fixed(m.mean_fluency) << " | " << fixed(m.mean_entertaining) << " | " << m.median_length << " |\n";
  }
  const auto& md = b.metadata;
  out << "\nLanguage: " << to_string(b.language) << ". Length penalty: c = " << fixed(md.penalty.coefficient, 3)
      << ", cap = " << fixed(md.penalty.cap, 2) << ", global median = " << md.global_median << ".";
  if (!md.interrogator.empty()) out << " Interrogator: " << md.interrogator << ".";
  if (!md.judges.empty()) {
    out << " Judges: ";
    for (std::size_t i = 0; i < md.judges.size(); ++i) out << (i ? ", " : "") << md.judges[i];
    out << ".";
  }
  out << " Seed: " << md.seed << ", bootstrap resamples: " << md.n_boot << ".";
  if (!md.suite_fingerprint.empty()) out << " Suite: " << md.suite_fingerprint << ".";
  if (!md.timestamp.empty()) out << " Generated: " << md.timestamp << ".";
  out << "\n";
  return out.str();
}

inline std::string to_markdown(const ValidationTable& t) {
  std::ostringstream out;
  out << "| Setup | Char. | Ent. | Fluency | Final |\n|---|---|---|---|---|\n";
  for (const auto& row : t.rows) {
    out << "| " << markdown_cell(row.setup);
    for (const char* c : {"in_character", "entertaining", "fluency", "final"}) {
      const auto& r = row.by_criterion.at(c);
      out << " | " << fixed(r.rho, 3) << " (p=" << fixed(r.p, 3) << ")";
    }
    out << " |\n";
  }
  out << "\nSamples: " << t.samples << ".\n";
  return out.str();
}

inline std::string to_markdown(const AgreementReport& r) {
  auto cell = [](const std::optional<double>& v) { return v ? fixed(*v, 2) : std::string("-"); };
  std::ostringstream out;
  out << "| |";
  for (const auto& a : r.annotators) out << " " << markdown_cell(a) << " |";
  out << " Aggregated |\n|---|";
  for (std::size_t i = 0; i <= r.annotators.size(); ++i) out << "---|";
  out << "\n";
  for (std::size_t a = 0; a < r.annotators.size(); ++a) {
    out << "| " << markdown_cell(r.annotators[a]) << " |";
    for (std::size_t b = 0; b < r.annotators.size(); ++b) out << " " << cell(r.pairwise[a][b]) << " |";
    out << " " << cell(r.aggregated[a]) << " |\n";
  }
  out << "\nCriterion: " << r.criterion << ". Krippendorff's alpha ("
      << (r.metric == stats::AlphaMetric::interval ? "interval" : r.metric == stats::AlphaMetric::nominal ? "nominal" : "ordinal")
      << "): " << fixed(r.alpha, 2) << ". Samples: " << r.samples << ".\n";
  return out.str();
}

inline std::string to_markdown(const RankComparison& c) {
  std::ostringstream out;
  out << "| Model | Score A | Rank A | Score B | Rank B |\n|---|---|---|---|---|\n";
  for (const auto& p : c.pairs)
    out << "| " << markdown_cell(p.model) << " | " << fixed(p.score_a, 3) << " | " << fixed(p.rank_a, 1) << " | "
        << fixed(p.score_b, 3) << " | " << fixed(p.rank_b, 1) << " |\n";
  out << "\nSpearman rho = " << fixed(c.correlation.rho, 3) << ", p = " << fixed(c.correlation.p, 3) << ".\n";
  return out.str();
}

inline Json to_json(const ValidationTable& t) {
  Json rows = Json::array();
  for (const auto& row : t.rows) {
    Json r{{"setup", row.setup}};
    for (const auto& [c, corr] : row.by_criterion) r[c] = {{"rho", corr.rho}, {"p", corr.p}};
    rows.push_back(std::move(r));
  }
  return {{"samples", t.samples}, {"rows", std::move(rows)}};
}

inline Json to_json(const AgreementReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json pairwise = Json::array();
  for (const auto& row : r.pairwise) {
    Json line = Json::array();
    for (const auto& v : row) line.push_back(opt(v));
    pairwise.push_back(std::move(line));
  }
  Json aggregated = Json::array();
  for (const auto& v : r.aggregated) aggregated.push_back(opt(v));
  return {{"criterion", r.criterion},
          {"annotators", r.annotators},
          {"pairwise", std::move(pairwise)},
          {"aggregated", std::move(aggregated)},
          {"alpha", r.alpha},
          {"samples", r.samples}};
}

inline Json to_json(const RankComparison& c) {
  Json pairs = Json::array();
  for (const auto& p : c.pairs)
    pairs.push_back({{"model", p.model}, {"score_a", p.score_a}, {"rank_a", p.rank_a}, {"score_b", p.score_b},
                     {"rank_b", p.rank_b}});
  return {{"pairs", std::move(pairs)}, {"rho", c.correlation.rho}, {"p", c.correlation.p}};
}

/// Plot-ready table behind a rank scatter: one row per shared model.
inline std::string to_csv(const RankComparison& c) {
  std::ostringstream out;
  out << "model,score_a,rank_a,score_b,rank_b\n";
  for (const auto& p : c.pairs) {
    std::string name = p.model;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char ch : name) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      name = q + "\"";
    }
    out << name << "," << fixed(p.score_a, 4) << "," << fixed(p.rank_a, 1) << "," << fixed(p.score_b, 4) << ","
        << fixed(p.rank_b, 1) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------- static HTML

inline std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

/// File name for a conversation page: the key with unsafe characters replaced,
/// plus a hash of the exact key so distinct keys never collide.
inline std::string conversation_page_name(const ConversationKey& key) {
  const std::string raw = key.str();
  std::string out;
  std::uint32_t h = 2166136261u;
  for (char c : raw) {
    h = (h ^ static_cast<unsigned char>(c)) * 16777619u;
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_' || c == '.';
    out += c == '/' ? "__" : std::string(1, safe ? c : '-');
  }
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "-%08x", h);
  return out + suffix + ".html";
}

namespace detail {

inline constexpr const char* kStyle =
    "body{font-family:sans-serif;max-width:60em;margin:2em auto;padding:0 1em}"
    "table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:.3em .6em;text-align:right}"
    "td:first-child,th:first-child{text-align:left}"
    ".msg{border-left:3px solid #ccc;padding:.2em .8em;margin:.6em 0;white-space:pre-wrap}"
    ".user{border-color:#48c}.assistant{border-color:#8a4}.scores{font-size:.9em;color:#444}";

inline std::string page(const std::string& title, const std::string& body) {
  return "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>" + html_escape(title) +
         "</title>\n<style>" + kStyle + "</style>\n</head>\n<body>\n" + body + "</body>\n</html>\n";
}

inline std::string conversation_body(const JudgedRecord& r) {
  const auto& t = r.conversation.transcript;
  std::ostringstream out;
  out << "<p><a href=\"../index.html\">Leaderboard</a></p>\n";
  out << "<h1>" << html_escape(t.key.character_id) << " / " << html_escape(t.key.situation_id) << "</h1>\n";
  out << "<p>Player: " << html_escape(t.key.player_model) << ". Turns: " << t.completed_turns << " of "
      << t.turn_budget << ". Judging: " << to_string(r.status) << ".</p>\n";
  if (t.failure)
    out << "<p>Conversation failed at " << html_escape(t.failure->role) << " step " << t.failure->step << ": "
        << html_escape(t.failure->message) << "</p>\n";

  std::size_t i = 0;
  if (t.has_greeting()) {
    out << "<div class=\"msg assistant\"><b>greeting</b>\n" << html_escape(t.messages[0].content) << "</div>\n";
    i = 1;
  }
  int turn = 0;
  for (; i < t.messages.size(); ++i) {
    const auto& m = t.messages[i];
    if (m.role == "user") {
      ++turn;
      out << "<h2>Turn " << turn << "</h2>\n";
    }
    out << "<div class=\"msg " << html_escape(m.role) << "\"><b>" << (m.role == "user" ? "user" : "player") << "</b>\n"
        << html_escape(m.content) << "</div>\n";
    if (m.role != "assistant" || !r.pooled) continue;
    const auto it = std::find_if(r.pooled->turns.begin(), r.pooled->turns.end(),
                                 [&](const PooledTurn& p) { return p.turn == turn; });
    if (it == r.pooled->turns.end()) continue;
    out << "<div class=\"scores\"><p>Pooled: character " << fixed(it->in_character) << ", entertainment "
        << fixed(it->entertaining) << ", fluency " << fixed(it->fluency) << (it->is_refusal ? ", refusal" : "")
        << "</p>\n<ul>\n";
    for (const auto& v : r.verdicts) {
      for (const auto& e : v.evaluations) {
        if (e.turn != turn) continue;
        out << "<li><b>" << html_escape(v.judge_model) << "</b>: character " << e.in_character_score << " ("
            << html_escape(e.in_character_explanation) << "); entertainment " << e.entertaining_score << " ("
            << html_escape(e.entertaining_explanation) << "); fluency " << e.fluency_score << " ("
            << html_escape(e.fluency_explanation) << "); refusal " << (e.is_refusal ? "yes" : "no") << " ("
            << html_escape(e.is_refusal_explanation) << ")</li>\n";
      }
    }
    out << "</ul></div>\n";
  }
  for (const auto& f : r.failures)
    out << "<p>Judge " << html_escape(f.judge_model) << " failed: " << html_escape(f.message) << "</p>\n";
  return out.str();
}

}  // namespace detail

/// Writes index.html plus conversations/<page>.html for every judged record.
/// Returns the paths written, in order.
inline std::vector<std::filesystem::path> emit_html(const std::filesystem::path& out_dir, const Leaderboard& board,
                                                    std::span<const std::vector<JudgedRecord>> runs) {
  std::size_t total = 0;
  for (const auto& run : runs) total += run.size();
  if (total == 0) throw ValidationError({"nothing to emit: the judged run is empty"});

  std::set<std::string> names;
  std::map<std::string, std::vector<std::pair<std::string, const JudgedRecord*>>> by_model;
  for (const auto& run : runs) {
    for (const auto& r : run) {
      auto name = conversation_page_name(r.conversation.transcript.key);
      if (!names.insert(name).second) throw ValidationError({"duplicate conversation " + r.conversation.transcript.key.str()});
      by_model[r.conversation.transcript.key.player_model].emplace_back(std::move(name), &r);
    }
  }

  std::ostringstream index;
  index << "<h1>Leaderboard (" << to_string(board.language) << ")</h1>\n<table>\n"
        << "<tr><th>Model name</th><th>LN score</th><th>Agg.</th><th>Ref. ratio</th><th>Char.</th><th>Fluency</th>"
           "<th>Ent.</th><th>Length</th></tr>\n";
  for (const auto& m : board.rows)
    index << "<tr><td><a href=\"#" << html_escape(m.model) << "\">" << html_escape(m.model) << "</a></td><td>"
          << fixed(m.ln_score) << " &plusmn; " << fixed(m.ci95.width() / 2) << "</td><td>" << fixed(m.agg_score)
          << "</td><td>" << fixed(m.refusal_ratio) << "</td><td>" << fixed(m.mean_in_character) << "</td><td>"
          << fixed(m.mean_fluency) << "</td><td>" << fixed(m.mean_entertaining) << "</td><td>" << m.median_length
          << "</td></tr>\n";
  index << "</table>\n";
  for (const auto& [model, pages] : by_model) {
    index << "<h2 id=\"" << html_escape(model) << "\">" << html_escape(model) << "</h2>\n<ul>\n";
    for (const auto& [name, r] : pages) {
      const auto& key = r->conversation.transcript.key;
      index << "<li><a href=\"conversations/" << html_escape(name) << "\">" << html_escape(key.character_id) << " / "
            << html_escape(key.situation_id) << "</a>";
      if (r->pooled) {
        double sum = 0;
        for (const auto& t : r->pooled->turns) sum += agg_of(t.in_character, t.entertaining, t.fluency);
        if (!r->pooled->turns.empty()) index << " " << fixed(sum / static_cast<double>(r->pooled->turns.size()));
      } else {
        index << " (" << to_string(r->status) << ")";
      }
      index << "</li>\n";
    }
    index << "</ul>\n";
  }
  if (!board.metadata.timestamp.empty())
    index << "<p>Generated " << html_escape(board.metadata.timestamp) << ". Seed " << board.metadata.seed << ".</p>\n";

  std::vector<std::filesystem::path> written;
  const auto index_path = out_dir / "index.html";
  write_text(index_path, detail::page("Leaderboard", index.str()));
  written.push_back(index_path);
  for (const auto& [model, pages] : by_model) {
    for (const auto& [name, r] : pages) {
      const auto path = out_dir / "conversations" / name;
      write_text(path, detail::page(r->conversation.transcript.key.str(), detail::conversation_body(*r)));
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace rolebench
