// Acceptance suite: one PASS/FAIL line per criterion.
// Exit status is nonzero only when a criterion fails that is not listed in kKnownDeviations.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rolebench/rolebench.hpp"
#include "scripted_run.hpp"
#include "test_util.hpp"

using namespace rolebench;

namespace {

const std::set<int> kKnownDeviations{2};

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double v, int places = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(places);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<ModelMetrics> published(const char* file, Language lang) {
  return load_metrics_table_csv(testutil::fixtures() / "leaderboards" / file, lang);
}

// ---------------------------------------------------------------- 1

void ac1(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Expect {
    const char* file;
    double avg, min;
  };
  for (const auto& e : {Expect{"interrogators.csv", 0.58, 0.43}, Expect{"judges.csv", 0.50, 0.14}}) {
    const auto rankings = load_rankings_csv(testutil::fixtures() / "rankings" / e.file);
    const auto s = ranking_stability(rankings);
    o.check(rankings.size() == 6 && rankings[0].models.size() == 8, std::string(e.file) + " is 6 x 8");
    o.check(std::abs(s.average - e.avg) <= 0.02, std::string(e.file) + " avg " + num(s.average));
    o.check(std::abs(s.minimum - e.min) <= 0.02, std::string(e.file) + " min " + num(s.minimum));
    o.note(std::string(e.file) + ": avg " + num(s.average, 3) + ", min " + num(s.minimum, 3));
  }
  const double dt = seconds_since(t0);
  o.check(dt < 1.0, "runtime " + num(dt, 3) + " s");
}

// ---------------------------------------------------------------- 2

void ac2(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  int rows = 0;
  for (const auto& [file, lang] : {std::pair{"table3_ru.csv", Language::ru}, std::pair{"table4_en.csv", Language::en}}) {
    for (const auto& m : published(file, lang)) {
      ++rows;
      const double agg = agg_of(m.mean_in_character, m.mean_entertaining, m.mean_fluency);
      const double d = std::abs(agg - m.agg_score);
      if (d > 0.005)
        o.check(false, std::string(file) + " " + m.model + ": recomputed " + num(agg) + " vs published " +
                           num(m.agg_score, 2) + " (|d| = " + num(d) + ")");
    }
  }
  o.note(std::to_string(rows) + " published rows checked at +/-0.005");
  const double dt = seconds_since(t0);
  o.check(dt < 1.0, "runtime " + num(dt, 3) + " s");
}

// ---------------------------------------------------------------- 3

void ac3(Outcome& o) {
  const auto en = published("table4_en.csv", Language::en);
  const auto ru = published("table3_ru.csv", Language::ru);
  auto points = [](const std::vector<ModelMetrics>& rows) {
    std::vector<CalibrationPoint> out;
    for (const auto& m : rows) out.push_back({m.agg_score, m.median_length, m.ln_score});
    return out;
  };
  const std::vector<std::vector<CalibrationPoint>> groups{points(en), points(ru)};
  const auto fit = calibrate_length_penalty(groups);
  o.note("c = " + num(fit.params.coefficient, 3) + ", cap = " + num(fit.params.cap, 2) + ", global medians " +
         std::to_string(fit.global_medians.at(0)) + " (en) / " + std::to_string(fit.global_medians.at(1)) + " (ru)");

  double worst = 0;
  const std::vector<const std::vector<ModelMetrics>*> tables{&en, &ru};
  for (std::size_t g = 0; g < tables.size(); ++g) {
    const int median = fit.global_medians.at(g);
    for (const auto& m : *tables[g]) {
      const double ln = length_penalty(m.agg_score, m.median_length, median, fit.params);
      worst = std::max(worst, std::abs(ln - m.ln_score));
      o.check(std::abs(ln - m.ln_score) <= 0.03, m.model + " LN " + num(ln) + " vs " + num(m.ln_score, 2));
      if (m.median_length <= median) o.check(ln == m.agg_score, m.model + " below the median but penalized");
    }
  }
  o.note("max |LN error| " + num(worst, 3));

  // Monotone non-increasing in length, identity at or below the median, order-preserving in agg.
  std::mt19937_64 gen(20241015);
  std::uniform_real_distribution<double> agg(1.0, 5.0), coef(0.0, 0.5), cap(0.1, 2.0);
  std::uniform_int_distribution<int> len(1, 3000);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const PenaltyParams p{coef(gen), cap(gen)};
    const double a = agg(gen), b = agg(gen);
    const int g = len(gen);
    int l1 = len(gen), l2 = len(gen);
    if (l1 > l2) std::swap(l1, l2);
    const double ln1 = length_penalty(a, l1, g, p), ln2 = length_penalty(a, l2, g, p);
    if (ln2 > ln1 + 1e-12 || (l1 <= g && ln1 != a) || ln1 > a ||
        (a < b) != (ln1 < length_penalty(b, l1, g, p)))
      ++violations;
  }
  o.check(violations == 0, std::to_string(violations) + " property violations in 1000 random cases");
}

// ---------------------------------------------------------------- 4

std::vector<std::string> artifacts(const fixture::SuiteRun& run) {
  testutil::TempDir dir;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < run.runs.size(); ++i) {
    write_jsonl(dir / "run.jsonl", run.runs[i].records);
    write_jsonl(dir / "judged.jsonl", run.judged[i]);
    out.push_back(testutil::slurp(dir / "run.jsonl"));
    out.push_back(testutil::slurp(dir / "judged.jsonl"));
  }
  return out;
}

void ac4(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto one = fixture::run_scripted_suite(1);
  const auto eight = fixture::run_scripted_suite(8);
  const auto again = fixture::run_scripted_suite(8);

  for (std::size_t p = 0; p < one.runs.size(); ++p) {
    const auto& run = one.runs[p];
    const auto& model = one.config.players[p].model;
    int turns = 0;
    std::set<int> budgets;
    for (const auto& r : run.records) {
      turns += r.transcript.completed_turns;
      budgets.insert(r.transcript.turn_budget);
    }
    std::size_t annotations = 0;
    for (const auto& j : one.judged[p])
      if (j.pooled) annotations += j.pooled->turns.size();
    o.check(run.ok, model + " run not ok");
    o.check(run.records.size() == 64, model + ": " + std::to_string(run.records.size()) + " transcripts");
    o.check(turns == 288, model + ": sum of completed turns " + std::to_string(turns));
    o.check(annotations == 288, model + ": " + std::to_string(annotations) + " pooled turn annotations");
    o.check(budgets == std::set<int>{4, 5}, model + ": turn budgets are not {4, 5}");
    o.note(model + ": 64 transcripts, " + std::to_string(turns) + " turns, " + std::to_string(annotations) +
           " pooled annotations");
  }
  o.check(artifacts(one) == artifacts(eight), "artifacts differ between 1 and 8 workers");
  o.check(artifacts(eight) == artifacts(again), "artifacts differ between two runs");
  const double dt = seconds_since(t0);
  o.check(dt < 10.0, "runtime " + num(dt, 3) + " s");
  o.note("three full runs in " + num(dt, 2) + " s");
}

// ---------------------------------------------------------------- 5

void ac5(Outcome& o) {
  int mismatches = 0;
  long pairs = 0;
  for (int n = 3; n <= 6; ++n) {
    std::vector<int> a(static_cast<std::size_t>(n));
    std::iota(a.begin(), a.end(), 1);
    std::vector<std::vector<int>> perms;
    do perms.push_back(a);
    while (std::next_permutation(a.begin(), a.end()));
    for (const auto& x : perms) {
      std::vector<std::string> rx(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) rx[x[i] - 1] = "m" + std::to_string(i);
      for (const auto& y : perms) {
        ++pairs;
        // Definitions: rank-difference formula and the normalized concordant-minus-discordant count.
        double d2 = 0;
        int s = 0, m = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          d2 += (x[i] - y[i]) * (x[i] - y[i]);
          for (std::size_t j = i + 1; j < x.size(); ++j, ++m) s += ((x[i] < x[j]) == (y[i] < y[j])) ? 1 : -1;
        }
        const double rho = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        const double tau = static_cast<double>(s) / m;
        std::vector<std::string> ry(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) ry[y[i] - 1] = "m" + std::to_string(i);
        const std::vector<double> dx(x.begin(), x.end()), dy(y.begin(), y.end());
        if (std::abs(stats::spearman(dx, dy).rho - rho) > 1e-12) ++mismatches;
        if (std::abs(stats::kendall_tau(rx, ry) - tau) > 1e-12) ++mismatches;
      }
    }
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");
  o.note(std::to_string(pairs) + " permutation pairs, n = 3..6");

  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 1, 4, 3, 5};
  const double rho = stats::spearman(a, b).rho;
  o.check(std::abs(rho - 0.8) < 1e-12, "5-element rho " + num(rho, 12));

  constexpr std::nullopt_t N = std::nullopt;
  const stats::RatingMatrix perfect{{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}, {1, 2, 3, N, 5}};
  for (auto metric : {stats::AlphaMetric::nominal, stats::AlphaMetric::ordinal, stats::AlphaMetric::interval})
    o.check(std::abs(stats::krippendorff_alpha(perfect, metric) - 1.0) < 1e-12, "alpha on perfect agreement");
  const stats::RatingMatrix m{{1, 2, 3, 3, 2}, {1, 2, 3, 4, N}, {2, 2, 3, 3, 1}};
  const double ord = stats::krippendorff_alpha(m, stats::AlphaMetric::ordinal);
  const double itv = stats::krippendorff_alpha(m, stats::AlphaMetric::interval);
  o.check(std::abs(ord - 2344.0 / 2877.0) < 1e-9, "3x5 ordinal alpha " + num(ord, 12));
  o.check(std::abs(itv - 113.0 / 152.0) < 1e-9, "3x5 interval alpha " + num(itv, 12));
  o.note("3x5 alpha: ordinal " + num(ord, 6) + ", interval " + num(itv, 6));
}

// ---------------------------------------------------------------- 6

void ac6(Outcome& o) {
  auto mean_of = [](std::span<const double> s) { return stats::mean(s); };
  const std::vector<double> flat(40, 3.5);
  const auto z = stats::bootstrap_ci<double>(flat, mean_of, 1000, 0.95, 1);
  o.check(z.lo == 3.5 && z.hi == 3.5, "constant input interval [" + num(z.lo) + ", " + num(z.hi) + "]");

  std::mt19937_64 gen(500);
  std::normal_distribution<double> dist(2.0, 1.5);
  const int trials = 500;
  int covered = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> xs(50);
    for (auto& x : xs) x = dist(gen);
    const auto ci = stats::bootstrap_ci<double>(xs, mean_of, 1000, 0.95, static_cast<std::uint64_t>(t) + 1);
    if (ci.lo <= 2.0 && 2.0 <= ci.hi) ++covered;
    if (t == 0) {
      const auto again = stats::bootstrap_ci<double>(xs, mean_of, 1000, 0.95, 1);
      o.check(again == ci, "identical seeds gave different intervals");
    }
  }
  const double rate = static_cast<double>(covered) / trials;
  o.check(rate >= 0.90 && rate <= 0.99, "coverage " + num(rate, 3));
  o.note("coverage " + num(rate, 3) + " over " + std::to_string(trials) + " trials");
}

// ---------------------------------------------------------------- 7

void ac7(Outcome& o) {
  const auto assets = load_assets(testutil::fixtures() / "suite");
  const auto dir = testutil::source_dir() / "tests/golden";
  int files = 0;
  auto same = [&](const std::string& rendered, const std::string& name) {
    ++files;
    o.check(rendered == testutil::slurp(dir / name), name + " differs from its golden");
  };
  for (const char* id : {"ada_brennan", "brother_tomas", "captain_vey", "dr_okafor"})
    same(render_player(*assets.find_character(id)), std::string("player_") + id + ".txt");

  const auto transcripts = nlohmann::json::parse(testutil::slurp(dir / "transcripts.json"));
  auto messages = [&](const char* name) {
    std::vector<ChatMessage> out;
    for (const auto& m : transcripts.at(name).at("messages")) out.push_back({m.at("role"), m.at("content")});
    return out;
  };
  for (const char* name : {"empty", "two_turns", "greeting"}) {
    const auto& t = transcripts.at(name);
    const auto* card = assets.find_character(t.at("character").get<std::string>());
    const auto* sit = assets.find_situation(t.at("situation").get<std::string>());
    same(render_interrogator(card->char_summary, *sit, messages(name)), std::string("interrogator_") + name + ".txt");
  }
  for (const char* name : {"two_turns", "greeting"}) {
    const auto* card = assets.find_character(transcripts.at(name).at("character").get<std::string>());
    const auto out = render_judge(card->system_prompt, messages(name));
    same(out, std::string("judge_") + name + ".txt");
    o.check(out.find("Turn 1:\n") != std::string::npos && out.find("Turn 2:\n") != std::string::npos,
            std::string("judge_") + name + " lacks Turn k numbering");
    o.check(out.find("\nplayer: ") != std::string::npos && out.find("\nassistant: ") == std::string::npos,
            std::string("judge_") + name + " does not label replies as player");
  }
  o.note(std::to_string(files) + " golden files compared");
}

// ---------------------------------------------------------------- 8

void ac8(Outcome& o) {
  o.note("not reproducible here: live leaderboard scores, human-correlation magnitudes "
         "(e.g. ensemble final rho 0.604 / 0.612) and refusal ratios need paid APIs and human annotators");
  const auto human = aggregate_human(load_annotations_csv(testutil::fixtures() / "humans/annotations_en.csv"));
  const auto setups = load_auto_scores_csv(testutil::fixtures() / "humans/auto_scores_en.csv");
  const std::pair<std::string, std::string> pair{"Claude 3.5 Sonnet", "GPT-4o"};
  const auto table = correlate_with_humans(setups, human, {pair});

  o.check(table.samples == 250, std::to_string(table.samples) + " samples");
  o.check(table.rows.size() == setups.size() + 1, "row count " + std::to_string(table.rows.size()));
  for (const auto& row : table.rows)
    o.check(row.by_criterion.size() == 4, row.setup + " lacks a criterion column");
  const auto md = to_markdown(table);
  o.check(md.starts_with("| Setup | Char. | Ent. | Fluency | Final |\n"), "markdown header");

  // Ensemble row must correlate the per-sample average of the two setups, not average their correlations.
  auto lookup = [&](const std::string& name) -> const SampleScores& {
    for (const auto& [setup, scores] : setups)
      if (setup == name) return scores;
    throw ValidationError({"no setup " + name});
  };
  const auto& a = lookup(pair.first);
  const auto& b = lookup(pair.second);
  std::vector<double> pooled, ref;
  for (const auto& [sample, h] : human) {
    pooled.push_back((a.at(sample).final_score() + b.at(sample).final_score()) / 2);
    ref.push_back(h.final_score());
  }
  const double direct = stats::spearman(pooled, ref).rho;
  const double reported = table.rows.back().by_criterion.at("final").rho;
  const double ra = table.rows[0].by_criterion.at("final").rho;
  const double rb = table.rows[2].by_criterion.at("final").rho;
  o.check(table.rows.back().setup == "Avg(Claude 3.5 Sonnet, GPT-4o)", "ensemble row label");
  o.check(std::abs(direct - reported) < 1e-9, "ensemble rho " + num(reported, 15) + " vs pooled " + num(direct, 15));
  o.note("ensemble final rho " + num(reported, 3) + " (members " + num(ra, 3) + ", " + num(rb, 3) + ")");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "ranking stability of the interrogator and judge groups", ac1},
      {2, "published agg equals the mean of the criteria", ac2},
      {3, "length penalty calibration and properties", ac3},
      {4, "scripted protocol run", ac4},
      {5, "statistics oracles", ac5},
      {6, "bootstrap behaviour", ac6},
      {7, "prompt goldens", ac7},
      {8, "human validation pipeline on the synthetic fixture", ac8},
  };

  int unexpected = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double dt = seconds_since(t0);
    const bool known = !o.pass && kKnownDeviations.count(c.id);
    std::cout << (o.pass ? "PASS" : "FAIL") << " AC" << c.id << " " << c.name << " (" << num(dt, 3) << " s)"
              << (known ? " [known deviation]" : "") << "\n";
    for (const auto& n : o.notes) std::cout << "     " << n << "\n";
    if (!o.pass && !known) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
