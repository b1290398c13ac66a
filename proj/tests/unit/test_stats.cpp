#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "rolebench/stats.hpp"

using namespace rolebench;
using namespace rolebench::stats;
using Catch::Matchers::WithinAbs;

namespace {

// Textbook formulas, valid for permutations without ties.
double spearman_no_ties(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

double kendall_by_signs(const std::vector<int>& a, const std::vector<int>& b) {
  int s = 0, pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j, ++pairs) s += ((a[i] < a[j]) == (b[i] < b[j])) ? 1 : -1;
  return static_cast<double>(s) / pairs;
}

// Position vector -> ranking of item names, best first.
std::vector<std::string> ranking_of(const std::vector<int>& positions) {
  std::vector<std::string> out(positions.size());
  for (std::size_t item = 0; item < positions.size(); ++item) out[positions[item] - 1] = "m" + std::to_string(item);
  return out;
}

std::vector<std::vector<int>> permutations(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 1);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

constexpr std::nullopt_t N = std::nullopt;

}  // namespace

TEST_CASE("type-7 quantiles and medians") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK_THAT(quantile({10, 20, 30, 40}, 0.1), WithinAbs(13.0, 1e-12));
  CHECK(quantile({7}, 0.9) == 7.0);
  CHECK_THROWS_AS(median({}), StatsError);
}

TEST_CASE("average ranks share ties") {
  const std::vector<double> x{10, 20, 20, 5};
  CHECK(average_ranks(x) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("ranks treat rounding noise as a tie") {
  const double a = (3.5 + 4.0 + 4.5) / 3, b = (4.5 + 4.0 + 3.5) / 3;
  const std::vector<double> x{a, 4.0, b, 1.0};
  CHECK(average_ranks(x) == std::vector<double>{3, 3, 3, 1});
  CHECK(average_ranks(std::vector<double>{1.0, 1.0 + 1e-6}) == std::vector<double>{1, 2});
}

TEST_CASE("spearman and kendall match brute force on every permutation pair up to n = 6") {
  for (int n = 3; n <= 6; ++n) {
    const auto perms = permutations(n);
    for (const auto& a : perms) {
      const auto ra = ranking_of(a);
      const auto xa = as_double(a);
      for (const auto& b : perms) {
        const auto rho = spearman(xa, as_double(b)).rho;
        if (std::abs(rho - spearman_no_ties(a, b)) > 1e-12) FAIL("spearman mismatch at n=" << n);
        const auto tau = kendall_tau(ra, ranking_of(b));
        if (std::abs(tau - kendall_by_signs(a, b)) > 1e-12) FAIL("kendall mismatch at n=" << n);
      }
    }
  }
  SUCCEED();
}

TEST_CASE("spearman reference values") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 1, 4, 3, 5};
  CHECK_THAT(spearman(a, b).rho, WithinAbs(0.8, 1e-12));
  CHECK_THAT(spearman(a, a).rho, WithinAbs(1.0, 1e-12));
  const std::vector<double> rev{5, 4, 3, 2, 1};
  CHECK_THAT(spearman(a, rev).rho, WithinAbs(-1.0, 1e-12));
  CHECK(spearman(a, rev).p == 0.0);

  // Tie-corrected, compared with scipy.stats.spearmanr.
  const std::vector<double> t{1, 2, 2, 3, 5};
  const auto c = spearman(t, b);
  CHECK_THAT(c.rho, WithinAbs(0.6668859288553503, 1e-12));
  CHECK_THAT(c.p, WithinAbs(0.21889398131323154, 1e-9));

  const std::vector<double> x7{1, 2, 3, 4, 5, 6, 7}, y7{2, 1, 4, 3, 7, 5, 6};
  const auto t7 = spearman(x7, y7);
  CHECK_THAT(t7.rho, WithinAbs(0.8214285714285715, 1e-12));
  CHECK_THAT(t7.p, WithinAbs(0.023448808345691505, 1e-9));
  // 172 of 5040 orderings are at least as extreme.
  CHECK_THAT(spearman(x7, y7, PValueMethod::permutation).p, WithinAbs(172.0 / 5040.0, 1e-12));
}

TEST_CASE("spearman rejects degenerate input") {
  const std::vector<double> two{1, 2}, three{1, 2, 3}, flat{4, 4, 4}, four{1, 2, 3, 4};
  CHECK_THROWS_AS(spearman(two, two), StatsError);
  CHECK_THROWS_AS(spearman(three, flat), StatsError);
  CHECK_THROWS_AS(spearman(three, four), StatsError);
  std::vector<double> ten(10);
  std::iota(ten.begin(), ten.end(), 0.0);
  CHECK_THROWS_AS(spearman(ten, ten, PValueMethod::permutation), StatsError);
  CHECK_NOTHROW(spearman(ten, ten));
}

TEST_CASE("kendall tau reference values and validation") {
  const std::vector<std::string> a{"a", "b", "c", "d"}, b{"a", "c", "b", "d"};
  CHECK_THAT(kendall_tau(a, b), WithinAbs(4.0 / 6.0, 1e-12));
  const std::vector<std::string> dup{"a", "a", "c", "d"}, other{"a", "b", "c", "e"}, short_{"a", "b", "c"};
  CHECK_THROWS_AS(kendall_tau(a, dup), StatsError);
  CHECK_THROWS_AS(kendall_tau(a, other), StatsError);
  CHECK_THROWS_AS(kendall_tau(a, short_), StatsError);
}

TEST_CASE("group tau statistics over all pairs") {
  const std::vector<std::vector<std::string>> rs{{"a", "b", "c"}, {"a", "b", "c"}, {"c", "b", "a"}};
  const auto s = group_tau_stats(rs);
  CHECK(s.pairs == 3);
  CHECK_THAT(s.average, WithinAbs(-1.0 / 3.0, 1e-12));
  CHECK(s.minimum == -1.0);
  CHECK_THROWS_AS(group_tau_stats(std::span<const std::vector<std::string>>(rs.data(), 1)), StatsError);
}

TEST_CASE("krippendorff alpha on the published reliability example") {
  const RatingMatrix m{{1, 2, 3, 3, 2, 1, 4, 1, 2, N, N, N},
                       {1, 2, 3, 3, 2, 2, 4, 1, 2, 5, N, 3},
                       {N, 3, 3, 3, 2, 3, 4, 2, 2, 5, 1, N},
                       {1, 2, 3, 3, 2, 4, 4, 1, 2, 5, 1, N}};
  CHECK_THAT(krippendorff_alpha(m, AlphaMetric::nominal), WithinAbs(0.743421, 5e-7));
  CHECK_THAT(krippendorff_alpha(m, AlphaMetric::ordinal), WithinAbs(0.815388, 5e-7));
  CHECK_THAT(krippendorff_alpha(m, AlphaMetric::interval), WithinAbs(0.849107, 5e-7));
}

TEST_CASE("krippendorff alpha on the frozen 3x5 oracle") {
  const RatingMatrix m{{1, 2, 3, 3, 2}, {1, 2, 3, 4, N}, {2, 2, 3, 3, 1}};
  CHECK_THAT(krippendorff_alpha(m, AlphaMetric::ordinal), WithinAbs(2344.0 / 2877.0, 1e-9));
  CHECK_THAT(krippendorff_alpha(m, AlphaMetric::interval), WithinAbs(113.0 / 152.0, 1e-9));
}

TEST_CASE("krippendorff alpha edge cases") {
  const RatingMatrix perfect{{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}, {1, 2, 3, N, 5}};
  for (auto metric : {AlphaMetric::nominal, AlphaMetric::ordinal, AlphaMetric::interval})
    CHECK_THAT(krippendorff_alpha(perfect, metric), WithinAbs(1.0, 1e-12));
  // Systematic disagreement drives alpha below zero.
  const RatingMatrix opposite{{1, 5, 1, 5}, {5, 1, 5, 1}};
  CHECK(krippendorff_alpha(opposite, AlphaMetric::interval) < 0);

  const RatingMatrix constant{{3, 3, 3}, {3, 3, 3}};
  CHECK_THROWS_AS(krippendorff_alpha(constant), StatsError);
  CHECK_THROWS_AS(krippendorff_alpha(RatingMatrix{{1, 2, 3}}), StatsError);
  CHECK_THROWS_AS(krippendorff_alpha(RatingMatrix{{1, 2, 3}, {1, 2}}), StatsError);
  // Units with a single rating carry no pairable values.
  const RatingMatrix sparse{{1, N, 3}, {N, 2, N}};
  CHECK_THROWS_AS(krippendorff_alpha(sparse), StatsError);
}

TEST_CASE("bootstrap of a constant sample has zero width") {
  const std::vector<double> xs(40, 4.25);
  const auto ci = bootstrap_ci<double>(xs, [](std::span<const double> s) { return mean(s); }, 500, 0.95, 3);
  CHECK(ci.lo == 4.25);
  CHECK(ci.hi == 4.25);
  CHECK(ci.width() == 0.0);
}

TEST_CASE("bootstrap is reproducible under a fixed seed") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> dist(0, 1);
  std::vector<double> xs(60);
  for (auto& x : xs) x = dist(gen);
  auto stat = [](std::span<const double> s) { return mean(s); };
  const auto a = bootstrap_ci<double>(xs, stat, 1000, 0.95, 42);
  const auto b = bootstrap_ci<double>(xs, stat, 1000, 0.95, 42);
  const auto c = bootstrap_ci<double>(xs, stat, 1000, 0.95, 43);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK((a.lo != c.lo || a.hi != c.hi));
  CHECK(a.lo < mean(xs));
  CHECK(a.hi > mean(xs));
  const auto narrow = bootstrap_ci<double>(xs, stat, 1000, 0.5, 42);
  CHECK(narrow.width() < a.width());
}

TEST_CASE("bootstrap coverage of the mean is near nominal") {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> dist(1.0, 2.0);
  int covered = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> xs(50);
    for (auto& x : xs) x = dist(gen);
    const auto ci = bootstrap_ci<double>(xs, [](std::span<const double> s) { return mean(s); }, 500, 0.95,
                                         static_cast<std::uint64_t>(t));
    if (ci.lo <= 1.0 && 1.0 <= ci.hi) ++covered;
  }
  const double rate = static_cast<double>(covered) / trials;
  CHECK(rate >= 0.88);
  CHECK(rate <= 0.99);
}

TEST_CASE("bootstrap argument validation") {
  const std::vector<double> xs{1, 2, 3};
  auto stat = [](std::span<const double> s) { return mean(s); };
  CHECK_THROWS_AS(bootstrap_ci<double>(std::span<const double>(xs.data(), 1), stat), StatsError);
  CHECK_THROWS_AS(bootstrap_ci<double>(xs, stat, 10), StatsError);
  CHECK_THROWS_AS(bootstrap_ci<double>(xs, stat, 1000, 1.0), StatsError);
}
