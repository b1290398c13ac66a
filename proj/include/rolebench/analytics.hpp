#pragma once

// Per-model aggregation, length penalty, human validation and rank comparison.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "rolebench/assets.hpp"
#include "rolebench/csv.hpp"
#include "rolebench/error.hpp"
#include "rolebench/judging.hpp"
#include "rolebench/stats.hpp"

namespace rolebench {

/// Number of Unicode code points in a UTF-8 string.
inline int utf8_length(std::string_view s) {
  int n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

// ---------------------------------------------------------------- metrics

/// What bootstrap resamples: one judged conversation.
struct ConversationScores {
  std::vector<PooledTurn> turns;
  bool refused = false;
  std::vector<int> reply_lengths;
};

inline ConversationScores conversation_scores(const JudgedRecord& r) {
  if (!r.pooled) throw ValidationError({"conversation " + r.conversation.transcript.key.str() + " has no pooled scores"});
  ConversationScores s;
  s.turns = r.pooled->turns;
  s.refused = r.pooled->is_refusal;
  for (const auto* m : r.conversation.transcript.player_replies()) s.reply_lengths.push_back(utf8_length(m->content));
  return s;
}

struct PenaltyParams {
  double coefficient = 0.031;
  double cap = 1.3;

  bool operator==(const PenaltyParams&) const = default;
};

struct ModelMetrics {
  std::string model;
  Language language = Language::en;
  std::size_t conversations = 0;  // judged and usable
  std::size_t turns = 0;          // turn annotations behind the means
  double mean_in_character = 0;
  double mean_entertaining = 0;
  double mean_fluency = 0;
  double refusal_ratio = 0;
  double agg_score = 0;
  int median_length = 0;
  double ln_score = 0;
  stats::Interval ci95;

  bool operator==(const ModelMetrics&) const = default;
};

inline double agg_of(double in_character, double entertaining, double fluency) {
  return (in_character + fluency + entertaining) / 3.0;
}

/// Means over every pooled turn (the unit of annotation), refusal ratio over conversations.
inline ModelMetrics metrics_from_scores(std::span<const ConversationScores> convs, bool include_refused_turns = true) {
  if (convs.empty()) throw StatsError("model_metrics: no judged conversations");
  ModelMetrics m;
  m.conversations = convs.size();
  double ic = 0, ent = 0, flu = 0;
  std::size_t refused = 0;
  std::vector<double> lengths;
  for (const auto& c : convs) {
    if (c.refused) ++refused;
    for (const auto& t : c.turns) {
      if (!include_refused_turns && t.is_refusal) continue;
      ic += t.in_character;
      ent += t.entertaining;
      flu += t.fluency;
      ++m.turns;
    }
    lengths.insert(lengths.end(), c.reply_lengths.begin(), c.reply_lengths.end());
  }
  if (m.turns == 0) throw StatsError("model_metrics: no turn annotations left to average");
  const auto n = static_cast<double>(m.turns);
  m.mean_in_character = ic / n;
  m.mean_entertaining = ent / n;
  m.mean_fluency = flu / n;
  m.agg_score = agg_of(m.mean_in_character, m.mean_entertaining, m.mean_fluency);
  m.refusal_ratio = static_cast<double>(refused) / static_cast<double>(convs.size());
  m.median_length = lengths.empty() ? 0 : static_cast<int>(std::lround(stats::median(lengths)));
  m.ln_score = m.agg_score;
  return m;
}

/// Metrics for one player model. Excluded and unjudged conversations are skipped.
inline ModelMetrics model_metrics(std::span<const JudgedRecord> records, bool include_refused_turns = true) {
  std::vector<ConversationScores> convs;
  std::optional<std::string> model;
  std::optional<Language> language;
  for (const auto& r : records) {
    const auto& key = r.conversation.transcript.key;
    if (model && *model != key.player_model)
      throw ValidationError({"model_metrics: records mix players " + *model + " and " + key.player_model});
    model = key.player_model;
    language = r.conversation.language;
    if (r.usable()) convs.push_back(conversation_scores(r));
  }
  auto m = metrics_from_scores(convs, include_refused_turns);
  m.model = model.value_or("");
  m.language = language.value_or(Language::en);
  return m;
}

/// ln = agg - c * agg * min(cap, (L - G) / G) for L > G, agg otherwise.
inline double length_penalty(double agg, int median_length, int global_median, const PenaltyParams& params = {}) {
  if (global_median <= 0) throw StatsError("length_penalty: global median must be positive");
  if (median_length <= global_median) return agg;
  const double excess = static_cast<double>(median_length - global_median) / static_cast<double>(global_median);
  return agg - params.coefficient * agg * std::min(params.cap, excess);
}

/// Median length over every player message of every model in the run.
inline int global_median_length(std::span<const std::vector<JudgedRecord>> runs) {
  std::vector<double> lengths;
  for (const auto& run : runs)
    for (const auto& r : run)
      for (const auto* m : r.conversation.transcript.player_replies())
        lengths.push_back(utf8_length(m->content));
  if (lengths.empty()) throw StatsError("global median of an empty run");
  return static_cast<int>(std::lround(stats::median(lengths)));
}

struct CalibrationPoint {
  double agg = 0;
  int median_length = 0;
  double ln = 0;  // published value
};

struct CalibrationResult {
  PenaltyParams params;
  std::vector<int> global_medians;  // one per group
  double max_error = 0;
  double sum_squared_error = 0;
};

struct CalibrationGrid {
  double coefficient_max = 0.5;
  double coefficient_step = 0.001;
  double cap_min = 0.1;
  double cap_max = 2.0;
  double cap_step = 0.1;
};

/// Grid search for a shared (c, cap) and one global median per group (language)
/// minimising the worst absolute LN error, ties broken by squared error.
inline CalibrationResult calibrate_length_penalty(std::span<const std::vector<CalibrationPoint>> groups,
                                                  const CalibrationGrid& grid = {}) {
  if (groups.empty()) throw StatsError("calibration needs at least one group");
  struct Fit {
    double max = std::numeric_limits<double>::infinity();
    double sse = std::numeric_limits<double>::infinity();
    int g = 0;
    bool better_than(const Fit& o) const { return max < o.max - 1e-12 || (std::abs(max - o.max) <= 1e-12 && sse < o.sse); }
  };
  CalibrationResult best;
  best.max_error = std::numeric_limits<double>::infinity();
  best.sum_squared_error = std::numeric_limits<double>::infinity();

  const int cap_steps = static_cast<int>(std::lround((grid.cap_max - grid.cap_min) / grid.cap_step));
  const int c_steps = static_cast<int>(std::lround(grid.coefficient_max / grid.coefficient_step));
  for (int ci = 0; ci <= c_steps; ++ci) {
    for (int ki = 0; ki <= cap_steps; ++ki) {
      const PenaltyParams p{ci * grid.coefficient_step, grid.cap_min + ki * grid.cap_step};
      CalibrationResult cand{p, {}, 0, 0};
      for (const auto& group : groups) {
        if (group.empty()) throw StatsError("calibration group is empty");
        int lo = std::numeric_limits<int>::max(), hi = 1;
        for (const auto& pt : group) {
          lo = std::min(lo, pt.median_length);
          hi = std::max(hi, pt.median_length);
        }
        Fit fit;
        for (int g = std::max(1, lo); g <= hi; ++g) {
          Fit f{0, 0, g};
          for (const auto& pt : group) {
            const double err = std::abs(length_penalty(pt.agg, pt.median_length, g, p) - pt.ln);
            f.max = std::max(f.max, err);
            f.sse += err * err;
          }
          if (f.better_than(fit)) fit = f;
        }
        cand.global_medians.push_back(fit.g);
        cand.max_error = std::max(cand.max_error, fit.max);
        cand.sum_squared_error += fit.sse;
      }
      if (cand.max_error < best.max_error - 1e-12 ||
          (std::abs(cand.max_error - best.max_error) <= 1e-12 && cand.sum_squared_error < best.sum_squared_error))
        best = cand;
    }
  }
  return best;
}

struct AggregateOptions {
  PenaltyParams penalty;
  std::optional<int> global_median;  // default: median over all player messages in the run
  int n_boot = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  bool include_refused_turns = true;
};

struct Aggregate {
  std::vector<ModelMetrics> models;  // input order
  int global_median = 0;
};

/// Per-model seed derived from the master seed (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Full metrics (including LN score and its bootstrap CI) for each model's judged run.
inline Aggregate aggregate(std::span<const std::vector<JudgedRecord>> runs, const AggregateOptions& options = {}) {
  if (runs.empty()) throw StatsError("aggregate: no runs");
  Aggregate out;
  out.global_median = options.global_median ? *options.global_median : global_median_length(runs);
  std::optional<Language> language;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto m = model_metrics(runs[i], options.include_refused_turns);
    if (language && *language != m.language) throw ValidationError({"aggregate: runs mix languages"});
    language = m.language;
    m.ln_score = length_penalty(m.agg_score, m.median_length, out.global_median, options.penalty);

    std::vector<ConversationScores> convs;
    for (const auto& r : runs[i])
      if (r.usable()) convs.push_back(conversation_scores(r));
    if (convs.size() >= 2) {
      const auto ci = stats::bootstrap_ci<ConversationScores>(
          convs,
          [&](std::span<const ConversationScores> sample) {
            const auto bm = metrics_from_scores(sample, options.include_refused_turns);
            return length_penalty(bm.agg_score, bm.median_length, out.global_median, options.penalty);
          },
          options.n_boot, options.level, derive_seed(options.seed, i));
      m.ci95 = {std::min(ci.lo, m.ln_score), std::max(ci.hi, m.ln_score)};
    } else {
      m.ci95 = {m.ln_score, m.ln_score};
    }
    out.models.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------- human validation

inline const std::array<std::string, 3>& criteria() {
  static const std::array<std::string, 3> names{"in_character", "entertaining", "fluency"};
  return names;
}

struct CriterionScores {
  double in_character = 0;
  double entertaining = 0;
  double fluency = 0;

  double final_score() const { return agg_of(in_character, entertaining, fluency); }
  double get(const std::string& criterion) const {
    if (criterion == "in_character") return in_character;
    if (criterion == "entertaining") return entertaining;
    if (criterion == "fluency") return fluency;
    if (criterion == "final") return final_score();
    throw ValidationError({"unknown criterion '" + criterion + "'"});
  }

  bool operator==(const CriterionScores&) const = default;
};

using SampleScores = std::map<std::string, CriterionScores>;

struct Annotation {
  std::string sample_id;
  std::string annotator_id;
  std::string criterion;
  int score = 0;
};

struct AnnotationSet {
  std::vector<Annotation> annotations;

  std::vector<std::string> annotators() const {
    std::set<std::string> ids;
    for (const auto& a : annotations) ids.insert(a.annotator_id);
    return {ids.begin(), ids.end()};
  }
};

inline void validate(const AnnotationSet& set) {
  std::vector<std::string> problems;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& a : set.annotations) {
    const std::string where = a.sample_id + "/" + a.annotator_id + "/" + a.criterion;
    if (std::find(criteria().begin(), criteria().end(), a.criterion) == criteria().end())
      problems.push_back(where + ": unknown criterion");
    if (a.score < kLikertMin || a.score > kLikertMax) problems.push_back(where + ": score outside [1, 5]");
    if (!seen.emplace(a.sample_id, a.annotator_id, a.criterion).second) problems.push_back(where + ": duplicate");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

/// Columns: sample_id, annotator_id, criterion, score.
inline AnnotationSet load_annotations_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ParseError(path.string(), 1, "empty annotation table");
  const std::string origin = path.string();
  const auto sid = csv::column(rows[0], "sample_id", origin), aid = csv::column(rows[0], "annotator_id", origin),
             crit = csv::column(rows[0], "criterion", origin), sc = csv::column(rows[0], "score", origin);
  AnnotationSet set;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != rows[0].fields.size()) throw ParseError(origin, rows[i].line, "wrong number of fields");
    const double score = csv::to_double(f[sc], origin, rows[i].line);
    if (score != std::floor(score)) throw ParseError(origin, rows[i].line, "score is not an integer");
    set.annotations.push_back({f[sid], f[aid], f[crit], static_cast<int>(score)});
  }
  validate(set);
  return set;
}

namespace detail {

struct Partial {
  std::array<double, 3> sum{};
  std::array<int, 3> count{};
};

inline std::size_t criterion_index(const std::string& c) {
  const auto it = std::find(criteria().begin(), criteria().end(), c);
  if (it == criteria().end()) throw ValidationError({"unknown criterion '" + c + "'"});
  return static_cast<std::size_t>(it - criteria().begin());
}

inline SampleScores finish(const std::map<std::string, Partial>& partial, const std::string& what) {
  SampleScores out;
  std::vector<std::string> problems;
  for (const auto& [id, p] : partial) {
    for (std::size_t c = 0; c < 3; ++c)
      if (p.count[c] == 0) problems.push_back(what + " sample " + id + " has no " + criteria()[c] + " score");
    if (!problems.empty()) continue;
    out[id] = {p.sum[0] / p.count[0], p.sum[1] / p.count[1], p.sum[2] / p.count[2]};
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return out;
}

}  // namespace detail

/// Per-sample mean over annotators for each criterion; final is the mean of the three.
inline SampleScores aggregate_human(const AnnotationSet& set) {
  validate(set);
  std::map<std::string, detail::Partial> partial;
  for (const auto& a : set.annotations) {
    auto& p = partial[a.sample_id];
    const auto c = detail::criterion_index(a.criterion);
    p.sum[c] += a.score;
    ++p.count[c];
  }
  if (partial.empty()) throw ValidationError({"annotation set is empty"});
  return detail::finish(partial, "human");
}

/// Automatic scores, columns: sample_id, setup, criterion, score. Setups keep file order.
inline std::vector<std::pair<std::string, SampleScores>> load_auto_scores_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ParseError(path.string(), 1, "empty score table");
  const std::string origin = path.string();
  const auto sid = csv::column(rows[0], "sample_id", origin), setup = csv::column(rows[0], "setup", origin),
             crit = csv::column(rows[0], "criterion", origin), sc = csv::column(rows[0], "score", origin);
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, detail::Partial>> partial;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != rows[0].fields.size()) throw ParseError(origin, rows[i].line, "wrong number of fields");
    if (!partial.count(f[setup])) order.push_back(f[setup]);
    auto& p = partial[f[setup]][f[sid]];
    const auto c = detail::criterion_index(f[crit]);
    if (p.count[c] != 0) throw ParseError(origin, rows[i].line, "duplicate score");
    p.sum[c] = csv::to_double(f[sc], origin, rows[i].line);
    p.count[c] = 1;
  }
  std::vector<std::pair<std::string, SampleScores>> out;
  for (const auto& name : order) out.emplace_back(name, detail::finish(partial[name], name));
  return out;
}

struct SetupCorrelation {
  std::string setup;
  std::map<std::string, stats::Correlation> by_criterion;  // the three criteria and "final"
};

struct ValidationTable {
  std::size_t samples = 0;
  std::vector<SetupCorrelation> rows;
};

inline std::string ensemble_name(const std::string& a, const std::string& b) { return "Avg(" + a + ", " + b + ")"; }

/// Per-sample mean of two setups' scores.
inline SampleScores ensemble_scores(const SampleScores& a, const SampleScores& b) {
  SampleScores out;
  for (const auto& [id, sa] : a) {
    const auto it = b.find(id);
    if (it == b.end()) throw ValidationError({"ensemble: sample " + id + " missing from one setup"});
    const auto& sb = it->second;
    out[id] = {(sa.in_character + sb.in_character) / 2, (sa.entertaining + sb.entertaining) / 2,
               (sa.fluency + sb.fluency) / 2};
  }
  if (out.size() != b.size()) throw ValidationError({"ensemble: setups cover different samples"});
  return out;
}

/// Spearman of each setup (and each requested two-setup ensemble, averaged per
/// sample before correlating) against the aggregated human scores.
inline ValidationTable correlate_with_humans(const std::vector<std::pair<std::string, SampleScores>>& setups,
                                             const SampleScores& human,
                                             const std::vector<std::pair<std::string, std::string>>& ensembles = {}) {
  std::vector<std::pair<std::string, SampleScores>> all = setups;
  for (const auto& [a, b] : ensembles) {
    const auto find = [&](const std::string& name) -> const SampleScores& {
      for (const auto& s : setups)
        if (s.first == name) return s.second;
      throw ValidationError({"ensemble references unknown setup '" + name + "'"});
    };
    all.emplace_back(ensemble_name(a, b), ensemble_scores(find(a), find(b)));
  }

  ValidationTable table;
  table.samples = human.size();
  for (const auto& [name, scores] : all) {
    std::vector<std::string> problems;
    for (const auto& [id, _] : scores)
      if (!human.count(id)) problems.push_back(name + ": sample " + id + " has no human annotation");
    for (const auto& [id, _] : human)
      if (!scores.count(id)) problems.push_back(name + ": sample " + id + " has no automatic score");
    if (!problems.empty()) throw ValidationError(std::move(problems));

    SetupCorrelation row{name, {}};
    for (const std::string c : {"in_character", "entertaining", "fluency", "final"}) {
      std::vector<double> x, y;
      for (const auto& [id, s] : human) {
        x.push_back(scores.at(id).get(c));
        y.push_back(s.get(c));
      }
      row.by_criterion[c] = stats::spearman(x, y);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------- annotator agreement

struct AgreementReport {
  std::string criterion;
  std::vector<std::string> annotators;
  std::vector<std::vector<std::optional<double>>> pairwise;  // Spearman on shared samples
  std::vector<std::optional<double>> aggregated;             // vs the mean of the other annotators
  stats::AlphaMetric metric = stats::AlphaMetric::ordinal;
  double alpha = 0;
  std::size_t samples = 0;
};

/// Inter-annotator agreement on one criterion or on "final" (mean of the three).
inline AgreementReport agreement(const AnnotationSet& set, const std::string& criterion = "final",
                                 stats::AlphaMetric metric = stats::AlphaMetric::ordinal) {
  validate(set);
  AgreementReport rep;
  rep.criterion = criterion;
  rep.metric = metric;
  rep.annotators = set.annotators();
  if (rep.annotators.size() < 2) throw StatsError("agreement needs at least 2 annotators");

  std::map<std::string, std::map<std::string, detail::Partial>> partial;  // annotator -> sample
  std::set<std::string> sample_ids;
  for (const auto& a : set.annotations) {
    auto& p = partial[a.annotator_id][a.sample_id];
    const auto c = detail::criterion_index(a.criterion);
    p.sum[c] += a.score;
    ++p.count[c];
    sample_ids.insert(a.sample_id);
  }
  const std::vector<std::string> samples(sample_ids.begin(), sample_ids.end());
  rep.samples = samples.size();

  // score[annotator][sample], missing when the annotator lacks a needed criterion
  stats::RatingMatrix score(rep.annotators.size(), std::vector<std::optional<double>>(samples.size()));
  for (std::size_t a = 0; a < rep.annotators.size(); ++a) {
    const auto& mine = partial[rep.annotators[a]];
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const auto it = mine.find(samples[s]);
      if (it == mine.end()) continue;
      const auto& p = it->second;
      if (criterion == "final") {
        if (p.count[0] && p.count[1] && p.count[2]) score[a][s] = agg_of(p.sum[0], p.sum[1], p.sum[2]);
      } else {
        const auto c = detail::criterion_index(criterion);
        if (p.count[c]) score[a][s] = p.sum[c];
      }
    }
  }

  auto correlate = [](const std::vector<double>& x, const std::vector<double>& y) -> std::optional<double> {
    if (x.size() < 3) return std::nullopt;
    try {
      return stats::spearman(x, y).rho;
    } catch (const StatsError&) {
      return std::nullopt;
    }
  };

  const std::size_t n = rep.annotators.size();
  rep.pairwise.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      std::vector<double> x, y;
      for (std::size_t s = 0; s < samples.size(); ++s)
        if (score[a][s] && score[b][s]) {
          x.push_back(*score[a][s]);
          y.push_back(*score[b][s]);
        }
      rep.pairwise[a][b] = correlate(x, y);
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> x, y;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (!score[a][s]) continue;
      double sum = 0;
      int count = 0;
      for (std::size_t b = 0; b < n; ++b)
        if (b != a && score[b][s]) {
          sum += *score[b][s];
          ++count;
        }
      if (count == 0) continue;
      x.push_back(*score[a][s]);
      y.push_back(sum / count);
    }
    rep.aggregated.push_back(correlate(x, y));
  }
  rep.alpha = stats::krippendorff_alpha(score, metric);
  return rep;
}

// ---------------------------------------------------------------- rank comparison

struct RankPair {
  std::string model;
  double score_a = 0;
  double score_b = 0;
  double rank_a = 0;  // 1 = best
  double rank_b = 0;
};

struct RankComparison {
  std::vector<RankPair> pairs;  // by rank_a, then model
  stats::Correlation correlation;
};

/// Columns: model, score.
inline std::map<std::string, double> load_score_table_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ParseError(path.string(), 1, "empty score table");
  const std::string origin = path.string();
  const auto mc = csv::column(rows[0], "model", origin), sc = csv::column(rows[0], "score", origin);
  std::map<std::string, double> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != rows[0].fields.size()) throw ParseError(origin, rows[i].line, "wrong number of fields");
    if (!out.emplace(f[mc], csv::to_double(f[sc], origin, rows[i].line)).second)
      throw ParseError(origin, rows[i].line, "duplicate model '" + f[mc] + "'");
  }
  return out;
}

inline RankComparison compare_rankings(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  std::vector<std::string> shared;
  for (const auto& [model, _] : a)
    if (b.count(model)) shared.push_back(model);
  if (shared.size() < 3)
    throw StatsError("compare_rankings: need at least 3 shared models, found " + std::to_string(shared.size()));
  std::vector<double> xa, xb, neg_a, neg_b;
  for (const auto& m : shared) {
    xa.push_back(a.at(m));
    xb.push_back(b.at(m));
    neg_a.push_back(-a.at(m));
    neg_b.push_back(-b.at(m));
  }
  const auto ra = stats::average_ranks(neg_a), rb = stats::average_ranks(neg_b);
  RankComparison out;
  for (std::size_t i = 0; i < shared.size(); ++i) out.pairs.push_back({shared[i], xa[i], xb[i], ra[i], rb[i]});
  std::sort(out.pairs.begin(), out.pairs.end(), [](const RankPair& p, const RankPair& q) {
    return p.rank_a != q.rank_a ? p.rank_a < q.rank_a : p.model < q.model;
  });
  out.correlation = stats::spearman(xa, xb);
  return out;
}

// ---------------------------------------------------------------- setup importance

struct Ranking {
  std::string setup;
  std::vector<std::string> models;  // best first
};

/// Header row names the setups; each following row holds the models at that rank.
inline std::vector<Ranking> load_rankings_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.size() < 2) throw ParseError(path.string(), 1, "ranking table needs a header and at least one row");
  std::vector<Ranking> out;
  for (const auto& name : rows[0].fields) out.push_back({name, {}});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].fields.size() != out.size()) throw ParseError(path.string(), rows[i].line, "wrong number of fields");
    for (std::size_t c = 0; c < out.size(); ++c) out[c].models.push_back(rows[i].fields[c]);
  }
  return out;
}

inline stats::TauGroupStats ranking_stability(std::span<const Ranking> rankings) {
  std::vector<std::vector<std::string>> lists;
  for (const auto& r : rankings) lists.push_back(r.models);
  return stats::group_tau_stats(lists);
}

}  // namespace rolebench
