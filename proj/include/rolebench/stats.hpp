#pragma once

// Rank correlation, agreement and resampling statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "rolebench/error.hpp"

namespace rolebench::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw StatsError("mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of an unsorted sample.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw StatsError("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

/// 1-based ranks in ascending order; tied values share their average rank.
// Means of Likert scores reach equal values through different sums; treat ulp-level gaps as ties.
inline bool same_value(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && same_value(xs[order[j + 1]], xs[order[i]])) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("samples differ in length");
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw StatsError("correlation undefined: a sample is constant");
  return sxy / std::sqrt(sxx * syy);
}

struct Correlation {
  double rho = 0;
  double p = 1;
};

enum class PValueMethod { t_approximation, permutation };

/// Two-sided p-value of a correlation coefficient via Student's t with n-2 dof.
inline double t_approx_p(double rho, std::size_t n) {
  if (std::abs(rho) >= 1.0) return 0.0;
  const double dof = static_cast<double>(n) - 2.0;
  const double t = rho * std::sqrt(dof / (1.0 - rho * rho));
  boost::math::students_t_distribution<double> dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

/// Spearman's rho with tie-corrected average ranks.
/// The permutation p-value enumerates all n! orderings and is limited to n < 10.
inline Correlation spearman(std::span<const double> x, std::span<const double> y,
                            PValueMethod method = PValueMethod::t_approximation) {
  if (x.size() != y.size()) throw StatsError("spearman: samples differ in length");
  if (x.size() < 3) throw StatsError("spearman: need at least 3 paired samples");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto all_tied = [](const std::vector<double>& r) {
    return std::all_of(r.begin(), r.end(), [&](double v) { return v == r.front(); });
  };
  if (all_tied(rx) || all_tied(ry)) throw StatsError("spearman: undefined for an all-ties sample");
  Correlation out;
  out.rho = pearson(rx, ry);
  if (method == PValueMethod::t_approximation) {
    out.p = t_approx_p(out.rho, x.size());
    return out;
  }
  if (x.size() >= 10) throw StatsError("spearman: permutation p-value is limited to n < 10");
  std::vector<double> perm = ry;
  std::sort(perm.begin(), perm.end());
  std::size_t extreme = 0, total = 0;
  do {
    ++total;
    if (std::abs(pearson(rx, perm)) >= std::abs(out.rho) - 1e-12) ++extreme;
  } while (std::next_permutation(perm.begin(), perm.end()));
  out.p = static_cast<double>(extreme) / static_cast<double>(total);
  return out;
}

/// Kendall's tau between two rankings (best first) of the same items.
inline double kendall_tau(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) throw StatsError("kendall_tau: rankings differ in length");
  if (a.size() < 2) throw StatsError("kendall_tau: need at least 2 items");
  std::map<std::string, std::size_t> pos_b;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (!pos_b.emplace(b[i], i).second) throw StatsError("kendall_tau: duplicate item '" + b[i] + "'");
  std::vector<std::size_t> mapped;
  std::set<std::string> seen;
  for (const auto& item : a) {
    if (!seen.insert(item).second) throw StatsError("kendall_tau: duplicate item '" + item + "'");
    auto it = pos_b.find(item);
    if (it == pos_b.end()) throw StatsError("kendall_tau: item '" + item + "' missing from the second ranking");
    mapped.push_back(it->second);
  }
  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < mapped.size(); ++i)
    for (std::size_t j = i + 1; j < mapped.size(); ++j) (mapped[i] < mapped[j] ? concordant : discordant) += 1;
  const double pairs = static_cast<double>(mapped.size() * (mapped.size() - 1) / 2);
  return static_cast<double>(concordant - discordant) / pairs;
}

struct TauGroupStats {
  double average = 0;
  double minimum = 0;
  std::size_t pairs = 0;
};

/// Average and minimum Kendall tau over all unordered pairs of rankings.
inline TauGroupStats group_tau_stats(std::span<const std::vector<std::string>> rankings) {
  if (rankings.size() < 2) throw StatsError("group_tau_stats: need at least 2 rankings");
  TauGroupStats out;
  out.minimum = 1.0;
  double sum = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    for (std::size_t j = i + 1; j < rankings.size(); ++j) {
      const double tau = kendall_tau(rankings[i], rankings[j]);
      sum += tau;
      out.minimum = std::min(out.minimum, tau);
      ++out.pairs;
    }
  }
  out.average = sum / static_cast<double>(out.pairs);
  return out;
}

enum class AlphaMetric { nominal, ordinal, interval };

/// Rows are annotators, columns are samples; nullopt marks a missing rating.
using RatingMatrix = std::vector<std::vector<std::optional<double>>>;

/// Krippendorff's alpha from the coincidence matrix of pairable values.
inline double krippendorff_alpha(const RatingMatrix& ratings, AlphaMetric metric = AlphaMetric::ordinal) {
  if (ratings.size() < 2) throw StatsError("krippendorff_alpha: need at least 2 annotators");
  const std::size_t samples = ratings.front().size();
  for (const auto& row : ratings)
    if (row.size() != samples) throw StatsError("krippendorff_alpha: ragged rating matrix");

  std::vector<double> values;
  for (const auto& row : ratings)
    for (const auto& v : row)
      if (v) values.push_back(*v);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t k = values.size();
  auto index_of = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };

  std::vector<std::vector<double>> coincidence(k, std::vector<double>(k, 0.0));
  for (std::size_t u = 0; u < samples; ++u) {
    std::vector<std::size_t> unit;
    for (const auto& row : ratings)
      if (row[u]) unit.push_back(index_of(*row[u]));
    if (unit.size() < 2) continue;
    const double weight = 1.0 / static_cast<double>(unit.size() - 1);
    for (std::size_t i = 0; i < unit.size(); ++i)
      for (std::size_t j = 0; j < unit.size(); ++j)
        if (i != j) coincidence[unit[i]][unit[j]] += weight;
  }
  std::vector<double> marginal(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) marginal[c] = std::accumulate(coincidence[c].begin(), coincidence[c].end(), 0.0);
  const double n = std::accumulate(marginal.begin(), marginal.end(), 0.0);

  auto delta2 = [&](std::size_t c, std::size_t g) -> double {
    switch (metric) {
      case AlphaMetric::nominal:
        return c == g ? 0.0 : 1.0;
      case AlphaMetric::interval:
        return (values[c] - values[g]) * (values[c] - values[g]);
      case AlphaMetric::ordinal: {
        const auto [lo, hi] = std::minmax(c, g);
        double s = 0;
        for (std::size_t x = lo; x <= hi; ++x) s += marginal[x];
        s -= (marginal[c] + marginal[g]) / 2.0;
        return s * s;
      }
    }
    return 0.0;
  };

  double observed = 0, expected = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t g = 0; g < k; ++g) {
      const double d = delta2(c, g);
      observed += coincidence[c][g] * d;
      expected += marginal[c] * marginal[g] * d;
    }
  }
  if (n < 2 || expected == 0) throw StatsError("krippendorff_alpha: undefined, no disagreement is possible");
  return 1.0 - (n - 1.0) * observed / expected;
}

struct Interval {
  double lo = 0;
  double hi = 0;

  double width() const { return hi - lo; }

  bool operator==(const Interval&) const = default;
};

/// Percentile bootstrap interval: resample `units` with replacement `n_boot`
/// times and take the central `level` mass of `statistic` over the resamples.
template <typename Unit, typename Statistic>
Interval bootstrap_ci(std::span<const Unit> units, Statistic&& statistic, int n_boot = 1000, double level = 0.95,
                      std::uint64_t seed = 0) {
  if (units.size() < 2) throw StatsError("bootstrap_ci: need at least 2 units");
  if (n_boot < 100) throw StatsError("bootstrap_ci: need at least 100 resamples");
  if (!(level > 0 && level < 1)) throw StatsError("bootstrap_ci: level must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, units.size() - 1);
  std::vector<Unit> resample(units.size());
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(n_boot));
  for (int b = 0; b < n_boot; ++b) {
    for (auto& slot : resample) slot = units[pick(rng)];
    stats.push_back(statistic(std::span<const Unit>(resample)));
  }
  const double tail = (1.0 - level) / 2.0;
  std::sort(stats.begin(), stats.end());
  return {quantile(stats, tail), quantile(stats, 1.0 - tail)};
}

}  // namespace rolebench::stats
