#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "uwauth/errors.hpp"
#include "uwauth/stats.hpp"
#include "uwauth/util.hpp"

using namespace uwauth;

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = i % 3 ? u(rng) : std::ldexp(u(rng), -60);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(parse_double(format_double(std::numeric_limits<double>::denorm_min())),
            std::numeric_limits<double>::denorm_min());
}

TEST(Parsing, RejectsGarbage) {
  EXPECT_THROW(parse_double("1.5x"), FormatError);
  EXPECT_THROW(parse_double(""), FormatError);
  EXPECT_THROW(parse_integer("3.0"), FormatError);
  EXPECT_EQ(parse_integer(" 42 "), 42);
  EXPECT_DOUBLE_EQ(parse_double(" -2.5e-3 "), -2.5e-3);
}

TEST(Strings, TrimSplitLower) {
  EXPECT_EQ(trim("  a b \t"), "a b");
  const auto parts = split("a,,b", ',');
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[1], "");
  EXPECT_EQ(to_lower("CLDAE"), "cldae");
}

TEST(Seeds, DerivedSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base = 0; base < 50; ++base)
    for (std::uint64_t salt = 0; salt < 50; ++salt) seen.insert(derive_seed(base, {salt}));
  EXPECT_EQ(seen.size(), 2500u);
  static_assert(derive_seed(1, {2}) == derive_seed(1, {2}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(hash_tag("sensor"), hash_tag("fusion"));
}

TEST(Shuffle, IsADeterministicPermutation) {
  std::vector<std::size_t> a(1000), b;
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = i;
  b = a;
  std::mt19937_64 r1(9), r2(9);
  shuffle_indices(a, r1);
  shuffle_indices(b, r2);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
  std::size_t fixed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) fixed += a[i] == i;
  EXPECT_LT(fixed, 10u);
}

TEST(Stats, NormalCdfMatchesBoost) {
  const boost::math::normal n;
  for (double x = -8.0; x <= 8.0; x += 0.37) EXPECT_NEAR(stats::normal_cdf(x), boost::math::cdf(n, x), 1e-15);
  EXPECT_NEAR(stats::normal_pdf(0.0), 1.0 / std::sqrt(2.0 * M_PI), 1e-16);
}

TEST(Stats, MomentsAndCorrelation) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(stats::mean(v), 2.5);
  EXPECT_DOUBLE_EQ(stats::stddev(v), std::sqrt(5.0 / 3.0));
  const std::vector<double> w{2, 4, 6, 8}, r{8, 6, 4, 2};
  EXPECT_NEAR(stats::pearson(v, w), 1.0, 1e-15);
  EXPECT_NEAR(stats::pearson(v, r), -1.0, 1e-15);
  EXPECT_THROW(stats::mean(std::vector<double>{}), EmptyInputError);
}

TEST(Stats, RanksAverageTies) {
  const std::vector<double> v{10, 20, 20, 5};
  EXPECT_EQ(stats::ranks(v), (std::vector<double>{2, 3.5, 3.5, 1}));
  const std::vector<double> a{1, 2, 3, 4, 5}, b{1, 4, 9, 16, 25};
  EXPECT_NEAR(stats::spearman(a, b), 1.0, 1e-15);
}

TEST(Stats, KsStatisticAgainstHandCount) {
  // Sample {0.1, 0.4, 0.7} against U(0,1): sup |F_n - F| = max over steps.
  const std::vector<double> s{0.7, 0.1, 0.4};
  const double d = stats::ks_statistic(s, [](double x) { return std::clamp(x, 0.0, 1.0); });
  const double want = std::max({0.1, 1.0 / 3 - 0.1, 0.4 - 1.0 / 3, 2.0 / 3 - 0.4, 0.7 - 2.0 / 3, 1.0 - 0.7});
  EXPECT_NEAR(d, want, 1e-15);
  const std::vector<double> a{1, 2, 3}, b{4, 5};
  EXPECT_DOUBLE_EQ(stats::ks_statistic_two_sample(a, b), 1.0);
}

TEST(Stats, KolmogorovSurvivalKnownValues) {
  // Classic 5% critical value 1.358.
  EXPECT_NEAR(stats::kolmogorov_survival(1.358), 0.05, 5e-4);
  EXPECT_NEAR(stats::kolmogorov_survival(1.628), 0.01, 2e-4);
  EXPECT_NEAR(stats::kolmogorov_survival(0.0), 1.0, 1e-12);
}

TEST(Stats, KsPValueOfUniformSampleIsNotSmall) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(5000);
  for (auto& v : s) v = u(rng);
  const double d = stats::ks_statistic(s, [](double x) { return std::clamp(x, 0.0, 1.0); });
  EXPECT_GT(stats::ks_pvalue(d, s.size()), 0.01);
  for (auto& v : s) v = v * v;  // no longer uniform
  const double d2 = stats::ks_statistic(s, [](double x) { return std::clamp(x, 0.0, 1.0); });
  EXPECT_LT(stats::ks_pvalue(d2, s.size()), 1e-6);
}
