#include <CLI11.hpp>

#include <iostream>
#include <set>

#include "rolebench/rolebench.hpp"

namespace rb = rolebench;
namespace fs = std::filesystem;

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    rb::write_text(out, text);
  }
}

std::string artifact_stem(const std::string& model) {
  std::string out;
  for (char c : model) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += c == '/' ? std::string("__") : std::string(1, safe ? c : '-');
  }
  return out;
}

rb::ChatClient make_client(const rb::RunConfig& cfg) { return rb::ChatClient(rb::build_registry(cfg), cfg.retry); }

std::vector<rb::RoleBinding> select(const std::vector<rb::RoleBinding>& all, const std::vector<std::string>& wanted,
                                    const char* what) {
  if (wanted.empty()) return all;
  std::vector<rb::RoleBinding> out;
  for (const auto& name : wanted) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const rb::RoleBinding& b) { return b.model == name; });
    if (it == all.end()) throw rb::ValidationError({std::string(what) + " '" + name + "' is not in the run config"});
    out.push_back(*it);
  }
  return out;
}

rb::stats::AlphaMetric parse_metric(const std::string& s) {
  if (s == "nominal") return rb::stats::AlphaMetric::nominal;
  if (s == "interval") return rb::stats::AlphaMetric::interval;
  return rb::stats::AlphaMetric::ordinal;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  std::string suite, config, out = "runs";
  std::vector<std::string> players;
  int workers = 0;
};

int cmd_run(const RunArgs& a) {
  const auto assets = rb::load_assets(a.suite);
  const auto cfg = rb::load_run_config(a.config);
  const auto client = make_client(cfg);
  const rb::MatrixOptions options{a.workers > 0 ? a.workers : cfg.workers, cfg.max_failure_ratio};
  int status = 0;
  for (const auto& player : select(cfg.players, a.players, "player")) {
    const auto run = rb::run_matrix(client, {player, cfg.interrogator}, assets, options);
    const auto path = fs::path(a.out) / (artifact_stem(player.model) + ".run.jsonl");
    rb::write_jsonl(path, run.records);
    std::cerr << player.model << ": " << run.records.size() << " conversations, " << run.failed << " failed -> "
              << path.string() << "\n";
    if (!run.ok) {
      std::cerr << player.model << ": failure ratio exceeds " << cfg.max_failure_ratio << "\n";
      status = 2;
    }
  }
  return status;
}

// ---------------------------------------------------------------- judge

struct JudgeArgs {
  std::string suite, config, out;
  std::vector<std::string> inputs, judges;
  int workers = 0;
};

int cmd_judge(const JudgeArgs& a) {
  const auto assets = rb::load_assets(a.suite);
  const auto cfg = rb::load_run_config(a.config);
  const auto client = make_client(cfg);
  const auto judges = select(cfg.judges, a.judges, "judge");
  for (const auto& in : a.inputs) {
    const auto records = rb::read_run_artifact(in);
    const auto judged = rb::rejudge(client, judges, assets, records, a.workers > 0 ? a.workers : cfg.workers);
    fs::path out = a.out.empty() || a.inputs.size() > 1 ? fs::path(in) : fs::path(a.out);
    if (a.out.empty() || a.inputs.size() > 1) {
      auto name = out.filename().string();
      const auto pos = name.rfind(".run.jsonl");
      name = (pos != std::string::npos ? name.substr(0, pos) : out.stem().string()) + ".judged.jsonl";
      out = (a.inputs.size() > 1 && !a.out.empty() ? fs::path(a.out) : out.parent_path()) / name;
    }
    rb::write_jsonl(out, judged);
    std::map<rb::JudgingStatus, int> counts;
    for (const auto& r : judged) ++counts[r.status];
    std::cerr << in << " -> " << out.string() << ":";
    for (const auto& [s, n] : counts) std::cerr << " " << rb::to_string(s) << "=" << n;
    std::cerr << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- aggregate

struct AggregateArgs {
  std::vector<std::string> inputs;
  std::string out, timestamp, suite;
  std::uint64_t seed = 0;
  int n_boot = 1000;
  std::optional<int> global_median;
  double c = rb::PenaltyParams{}.coefficient;
  double cap = rb::PenaltyParams{}.cap;
  bool exclude_refused_turns = false;
};

int cmd_aggregate(const AggregateArgs& a) {
  std::vector<std::vector<rb::JudgedRecord>> runs;
  for (const auto& in : a.inputs) runs.push_back(rb::read_judged_artifact(in));

  rb::AggregateOptions options;
  options.penalty = {a.c, a.cap};
  options.global_median = a.global_median;
  options.n_boot = a.n_boot;
  options.seed = a.seed;
  options.include_refused_turns = !a.exclude_refused_turns;
  const auto agg = rb::aggregate(runs, options);

  rb::MetricsReport report;
  report.models = agg.models;
  auto& md = report.metadata;
  md.penalty = options.penalty;
  md.global_median = agg.global_median;
  md.seed = a.seed;
  md.n_boot = a.n_boot;
  md.timestamp = a.timestamp;
  if (!a.suite.empty()) md.suite_fingerprint = rb::fingerprint(rb::load_assets(a.suite));
  std::set<std::string> judges;
  for (const auto& run : runs) {
    for (const auto& r : run) {
      for (const auto& t : r.conversation.telemetry)
        if (t.role == rb::kInterrogatorRole && md.interrogator.empty()) md.interrogator = t.model;
      for (const auto& v : r.verdicts) judges.insert(v.judge_model);
    }
  }
  md.judges.assign(judges.begin(), judges.end());

  const std::string path = a.out.empty() ? "metrics.json" : a.out;
  rb::write_metrics_report(path, report);
  for (const auto& m : agg.models)
    std::cerr << m.model << ": agg " << rb::fixed(m.agg_score) << ", LN " << rb::fixed(m.ln_score) << " ["
              << rb::fixed(m.ci95.lo) << ", " << rb::fixed(m.ci95.hi) << "], length " << m.median_length << "\n";
  std::cerr << "global median " << agg.global_median << " -> " << path << "\n";
  return 0;
}

// ---------------------------------------------------------------- board

struct BoardArgs {
  std::string metrics, format = "markdown", out;
  std::vector<std::string> judged;
};

int cmd_board(const BoardArgs& a) {
  const auto report = rb::read_metrics_report(a.metrics);
  const auto board = rb::build_leaderboard(report.models, report.metadata);
  if (a.format == "json") {
    emit(rb::to_json(board).dump(2) + "\n", a.out);
  } else if (a.format == "html") {
    if (a.out.empty()) throw rb::ValidationError({"--out DIR is required for html"});
    if (a.judged.empty()) throw rb::ValidationError({"--judged is required for html"});
    std::vector<std::vector<rb::JudgedRecord>> runs;
    for (const auto& in : a.judged) runs.push_back(rb::read_judged_artifact(in));
    const auto written = rb::emit_html(a.out, board, runs);
    std::cerr << written.size() << " pages written to " << a.out << "\n";
  } else {
    emit(rb::to_markdown(board), a.out);
  }
  return 0;
}

// ---------------------------------------------------------------- analyses

struct ValidateArgs {
  std::string annotations, scores, format = "markdown", out;
  std::vector<std::string> ensembles;
};

int cmd_validate_humans(const ValidateArgs& a) {
  const auto human = rb::aggregate_human(rb::load_annotations_csv(a.annotations));
  const auto setups = rb::load_auto_scores_csv(a.scores);
  std::vector<std::pair<std::string, std::string>> ensembles;
  for (const auto& e : a.ensembles) {
    const auto comma = e.find(',');
    if (comma == std::string::npos) throw rb::ValidationError({"--ensemble expects 'SETUP_A,SETUP_B', got '" + e + "'"});
    ensembles.emplace_back(e.substr(0, comma), e.substr(comma + 1));
  }
  const auto table = rb::correlate_with_humans(setups, human, ensembles);
  emit(a.format == "json" ? rb::to_json(table).dump(2) + "\n" : rb::to_markdown(table), a.out);
  return 0;
}

struct CompareArgs {
  std::string a, b, format = "markdown", out;
};

int cmd_compare(const CompareArgs& a) {
  const auto first = rb::load_score_table_csv(a.a);
  const auto cmp = rb::compare_rankings(first, rb::load_score_table_csv(a.b));
  if (a.format == "json") emit(rb::to_json(cmp).dump(2) + "\n", a.out);
  else if (a.format == "csv") emit(rb::to_csv(cmp), a.out);
  else emit(rb::to_markdown(cmp), a.out);
  return 0;
}

struct AgreementArgs {
  std::string annotations, criterion = "final", metric = "ordinal", format = "markdown", out;
};

int cmd_agreement(const AgreementArgs& a) {
  const auto rep = rb::agreement(rb::load_annotations_csv(a.annotations), a.criterion, parse_metric(a.metric));
  emit(a.format == "json" ? rb::to_json(rep).dump(2) + "\n" : rb::to_markdown(rep), a.out);
  return 0;
}

struct ImportanceArgs {
  std::vector<std::string> rankings;
  std::string format = "markdown", out;
};

int cmd_importance(const ImportanceArgs& a) {
  rb::Json rows = rb::Json::array();
  std::ostringstream md;
  md << "| Group | Rankings | Avg. Kendall tau | Min. Kendall tau |\n|---|---|---|---|\n";
  for (const auto& path : a.rankings) {
    const auto rankings = rb::load_rankings_csv(path);
    const auto s = rb::ranking_stability(rankings);
    const auto group = fs::path(path).stem().string();
    rows.push_back({{"group", group}, {"rankings", rankings.size()}, {"pairs", s.pairs}, {"average", s.average},
                    {"minimum", s.minimum}});
    md << "| " << rb::markdown_cell(group) << " | " << rankings.size() << " | " << rb::fixed(s.average, 3) << " | "
       << rb::fixed(s.minimum, 3) << " |\n";
  }
  emit(a.format == "json" ? rows.dump(2) + "\n" : md.str(), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Role-play benchmark harness: run, judge, aggregate and report."};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the character x situation matrix for players");
  run_cmd->add_option("--suite", run.suite, "Suite directory (characters/, situations/)")->required();
  run_cmd->add_option("--config", run.config, "Run configuration YAML")->required();
  run_cmd->add_option("--player", run.players, "Player model to run (repeatable; default: all)");
  run_cmd->add_option("--out", run.out, "Output directory for <player>.run.jsonl")->capture_default_str();
  run_cmd->add_option("--workers", run.workers, "Concurrent conversations (default: from config)");

  JudgeArgs judge;
  auto* judge_cmd = app.add_subcommand("judge", "Judge run artifacts without re-running conversations");
  judge_cmd->add_option("--suite", judge.suite, "Suite directory")->required();
  judge_cmd->add_option("--config", judge.config, "Run configuration YAML")->required();
  judge_cmd->add_option("--in", judge.inputs, "Run artifact(s)")->required();
  judge_cmd->add_option("--out", judge.out, "Judged artifact (one input) or directory (several)");
  judge_cmd->add_option("--judges", judge.judges, "Judge models to use, comma-separated (default: all configured)")
      ->delimiter(',');
  judge_cmd->add_option("--workers", judge.workers, "Concurrent judge calls (default: from config)");

  AggregateArgs agg;
  std::optional<int> global_median;
  auto* agg_cmd = app.add_subcommand("aggregate", "Per-model metrics, length penalty and bootstrap CI");
  agg_cmd->add_option("--in", agg.inputs, "Judged artifact per model")->required();
  agg_cmd->add_option("--out", agg.out, "Metrics JSON (default: metrics.json)");
  agg_cmd->add_option("--seed", agg.seed, "Bootstrap master seed")->capture_default_str();
  agg_cmd->add_option("--n-boot", agg.n_boot, "Bootstrap resamples")->capture_default_str();
  agg_cmd->add_option("--global-median", global_median, "Override the pooled global median length");
  agg_cmd->add_option("--c", agg.c, "Length penalty coefficient")->capture_default_str();
  agg_cmd->add_option("--cap", agg.cap, "Length penalty cap on relative excess")->capture_default_str();
  agg_cmd->add_option("--timestamp", agg.timestamp, "Timestamp recorded in the metadata");
  agg_cmd->add_option("--suite", agg.suite, "Suite directory, to record its fingerprint");
  agg_cmd->add_flag("--exclude-refused-turns", agg.exclude_refused_turns, "Drop refused turns from the means");

  BoardArgs board;
  auto* board_cmd = app.add_subcommand("board", "Emit the leaderboard");
  board_cmd->add_option("--metrics", board.metrics, "Metrics JSON from aggregate")->required();
  board_cmd->add_option("--format", board.format, "markdown, json or html")
      ->check(CLI::IsMember({"markdown", "json", "html"}))
      ->capture_default_str();
  board_cmd->add_option("--out", board.out, "Output file (markdown/json) or directory (html)");
  board_cmd->add_option("--judged", board.judged, "Judged artifacts for the html conversation pages");

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("validate-humans", "Spearman correlation of judge setups with human scores");
  val_cmd->add_option("--annotations", val.annotations, "CSV: sample_id, annotator_id, criterion, score")->required();
  val_cmd->add_option("--scores", val.scores, "CSV: sample_id, setup, criterion, score")->required();
  val_cmd->add_option("--ensemble", val.ensembles, "'SETUP_A,SETUP_B' averaged per sample (repeatable)");
  val_cmd->add_option("--format", val.format, "markdown or json")->check(CLI::IsMember({"markdown", "json"}));
  val_cmd->add_option("--out", val.out, "Output file (default: stdout)");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Rank correlation between two model score tables");
  cmp_cmd->add_option("--a", cmp.a, "CSV: model, score")->required();
  cmp_cmd->add_option("--b", cmp.b, "CSV: model, score")->required();
  cmp_cmd->add_option("--format", cmp.format, "markdown, json or csv")
      ->check(CLI::IsMember({"markdown", "json", "csv"}));
  cmp_cmd->add_option("--out", cmp.out, "Output file (default: stdout)");

  AgreementArgs agr;
  auto* agr_cmd = app.add_subcommand("agreement", "Inter-annotator agreement");
  agr_cmd->add_option("--annotations", agr.annotations, "CSV: sample_id, annotator_id, criterion, score")->required();
  agr_cmd->add_option("--criterion", agr.criterion, "in_character, entertaining, fluency or final")
      ->check(CLI::IsMember({"in_character", "entertaining", "fluency", "final"}))
      ->capture_default_str();
  agr_cmd->add_option("--metric", agr.metric, "Krippendorff difference metric")
      ->check(CLI::IsMember({"ordinal", "interval", "nominal"}))
      ->capture_default_str();
  agr_cmd->add_option("--format", agr.format, "markdown or json")->check(CLI::IsMember({"markdown", "json"}));
  agr_cmd->add_option("--out", agr.out, "Output file (default: stdout)");

  ImportanceArgs imp;
  auto* imp_cmd = app.add_subcommand("importance", "Ranking stability (Kendall tau) within groups of setups");
  imp_cmd->add_option("--rankings", imp.rankings, "CSV per group: header of setups, one row per rank")->required();
  imp_cmd->add_option("--format", imp.format, "markdown or json")->check(CLI::IsMember({"markdown", "json"}));
  imp_cmd->add_option("--out", imp.out, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*judge_cmd) return cmd_judge(judge);
    if (*agg_cmd) {
      agg.global_median = global_median;
      return cmd_aggregate(agg);
    }
    if (*board_cmd) return cmd_board(board);
    if (*val_cmd) return cmd_validate_humans(val);
    if (*cmp_cmd) return cmd_compare(cmp);
    if (*agr_cmd) return cmd_agreement(agr);
    if (*imp_cmd) return cmd_importance(imp);
  } catch (const rb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
