#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support/checks.hpp"
#include "uwauth/errors.hpp"
#include "uwauth/eval.hpp"

using namespace uwauth;
using namespace uwauth::eval;

namespace {

ScoreSet make(std::vector<double> alice, std::vector<double> eve) {
  ScoreSet s;
  for (double z : alice) s.push_back(z, 1);
  for (double z : eve) s.push_back(z, 0);
  return s;
}

ScoreSet random_set(std::size_t n, std::uint64_t seed, double separation = 0.5, bool coarse = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ScoreSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng() & 1U);
    double z = g(rng) + (label ? separation : -separation);
    if (coarse) z = std::round(z * 4) / 4;  // many ties
    s.push_back(z, label);
  }
  return s;
}

}  // namespace

TEST(Rates, BalancedErrorDefinition) {
  EXPECT_DOUBLE_EQ(balanced_error(0.1, 0.3), 0.2);
}

TEST(Rates, SeparatedScores) {
  const auto r = compute_rates(make({0.9, 0.8, 0.7}, {0.1, 0.2, 0.3}), 0.5);
  EXPECT_EQ(r.p_fa, 0.0);
  EXPECT_EQ(r.p_md, 0.0);
  EXPECT_EQ(r.epsilon, 0.0);
}

TEST(Rates, DegenerateThresholds) {
  const auto s = make({0.9, 0.4}, {0.6, 0.1});
  const auto low = compute_rates(s, -5.0);
  EXPECT_EQ(low.p_fa, 0.0);
  EXPECT_EQ(low.p_md, 1.0);
  EXPECT_EQ(low.epsilon, 0.5);
  const auto high = compute_rates(s, 5.0);
  EXPECT_EQ(high.p_fa, 1.0);
  EXPECT_EQ(high.p_md, 0.0);
  EXPECT_EQ(high.epsilon, 0.5);
}

TEST(Rates, AcceptsAtEquality) {
  const auto r = compute_rates(make({0.5}, {0.5}), 0.5);
  EXPECT_EQ(r.p_fa, 0.0);
  EXPECT_EQ(r.p_md, 1.0);
}

TEST(Rates, MissingClassThrows) {
  EXPECT_THROW(compute_rates(make({0.1, 0.2}, {}), 0.5), MissingClassError);
  EXPECT_THROW(optimize_threshold(make({}, {0.1})), MissingClassError);
  ScoreSet s;
  EXPECT_THROW(s.push_back(0.3, 2), DomainError);
}

TEST(Rates, MonotoneInLambda) {
  const auto s = random_set(500, 3);
  double fa = 0.0, md = 1.0;
  for (double l = -4; l <= 4; l += 0.05) {
    const auto r = compute_rates(s, l);
    EXPECT_GE(r.p_fa, fa);
    EXPECT_LE(r.p_md, md);
    fa = r.p_fa;
    md = r.p_md;
  }
}

TEST(Rates, InvariantUnderIncreasingTransform) {
  const auto s = random_set(300, 4);
  auto t = s;
  for (auto& z : t.scores) z = std::exp(2 * z) + 1;
  for (double l : {-1.0, 0.0, 0.3, 1.2}) {
    const auto a = compute_rates(s, l), b = compute_rates(t, std::exp(2 * l) + 1);
    EXPECT_EQ(a.p_fa, b.p_fa);
    EXPECT_EQ(a.p_md, b.p_md);
  }
}

TEST(Threshold, TiesGoToSmallestLambda) {
  // Candidates -0.9 (0.5), 0.25 (0.25), 0.5 (0.5), 0.75 (0.25), 1.9 (0.5).
  const auto s = make({0.9, 0.4}, {0.6, 0.1});
  const auto c = optimize_threshold(s);
  EXPECT_DOUBLE_EQ(c.lambda, 0.25);
  EXPECT_DOUBLE_EQ(c.epsilon, 0.25);
  const auto r = compute_rates(s, c.lambda);
  EXPECT_EQ(r.p_fa, 0.0);
  EXPECT_EQ(r.p_md, 0.5);
}

TEST(Threshold, SeparableSetsReachZero) {
  const auto c = optimize_threshold(make({2.0, 3.0, 2.5}, {0.0, 1.0}));
  EXPECT_EQ(c.epsilon, 0.0);
  EXPECT_DOUBLE_EQ(c.lambda, 1.5);
}

TEST(Threshold, CandidateSet) {
  const auto c = candidate_thresholds(make({1.0, 3.0}, {3.0, 2.0}));
  EXPECT_EQ(c, (std::vector<double>{0.0, 1.5, 2.5, 4.0}));
}

TEST(Threshold, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = random_set(1500, seed, 0.4, seed % 2 == 0);
    const auto got = optimize_threshold(s);
    const auto want = uwauth::testing::brute_force_threshold(s);
    EXPECT_EQ(got.epsilon, want.epsilon);
    EXPECT_TRUE(uwauth::testing::same_decisions(s, got.lambda, want.lambda));
    EXPECT_LE(got.epsilon, 0.5);
  }
}

TEST(TargetFa, HandExample) {
  const auto s = make({0.9, 0.8, 0.7, 0.6}, {0.1});
  const double l = threshold_for_target_fa(s, 0.25);
  EXPECT_GT(l, 0.6);
  EXPECT_LE(l, 0.7);
  EXPECT_EQ(compute_rates(s, l).p_fa, 0.25);
}

TEST(TargetFa, Extremes) {
  const auto s = make({0.9, 0.8, 0.7, 0.6}, {0.1, 0.65});
  const double zero = threshold_for_target_fa(s, 0.0);
  EXPECT_LE(zero, 0.6);
  EXPECT_EQ(compute_rates(s, zero).p_fa, 0.0);
  EXPECT_GT(threshold_for_target_fa(s, 1.0), 0.9);
  EXPECT_THROW(threshold_for_target_fa(s, 1.5), DomainError);
}

TEST(TargetFa, IsLargestFeasibleCandidate) {
  const auto s = random_set(400, 9);
  for (double target : {0.01, 0.05, 0.2, 0.5}) {
    const double l = threshold_for_target_fa(s, target);
    EXPECT_LE(compute_rates(s, l).p_fa, target);
    for (double c : candidate_thresholds(s))
      if (c > l) {
        EXPECT_GT(compute_rates(s, c).p_fa, target);
        break;
      }
  }
}

TEST(Roc, SeparableCurvePassesThroughCorner) {
  const auto curve = roc(make({0.9, 0.8}, {0.1, 0.2}));
  bool corner = false;
  for (const auto& p : curve) corner |= p.p_fa == 0.0 && p.detection == 1.0;
  EXPECT_TRUE(corner);
  EXPECT_DOUBLE_EQ(roc_area(curve), 1.0);
}

TEST(Roc, EndpointsAndOrdering) {
  const auto curve = roc(random_set(200, 5));
  ASSERT_FALSE(curve.empty());
  EXPECT_EQ(curve.front().p_fa, 0.0);
  EXPECT_EQ(curve.back().p_fa, 1.0);
  EXPECT_EQ(curve.back().detection, 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i].p_fa, curve[i - 1].p_fa);
}

TEST(Roc, InvertedScoresStayBelowDiagonal) {
  const auto curve = roc(make({0.1, 0.2, 0.3}, {0.7, 0.8, 0.9}));
  for (const auto& p : curve) EXPECT_LE(p.detection, p.p_fa + 1e-12);
}

TEST(Roc, RandomScoresHaveAreaNearHalf) {
  const auto curve = roc(random_set(10000, 6, 0.0));
  EXPECT_NEAR(roc_area(curve), 0.5, 0.02);
}

TEST(Evaluate, ThresholdFromValidationAppliedToTest) {
  const auto val = make({0.6, 0.7}, {0.1, 0.2});
  const auto test = make({0.3, 0.8}, {0.35, 0.05});
  const auto r = evaluate(val, test, {"LD", 1, 0.5, 7}, true);
  EXPECT_DOUBLE_EQ(r.lambda, 0.4);
  EXPECT_EQ(r.rates.p_fa, 0.5);
  EXPECT_EQ(r.rates.p_md, 0.0);
  EXPECT_EQ(r.rates.epsilon, 0.25);
  EXPECT_FALSE(r.roc.empty());
  EXPECT_EQ(r.meta.scheme, "LD");
}

TEST(Evaluate, CsvRowAndRoc) {
  EvalReport r;
  r.meta = {"CLDAE", 3, 0.1, 4};
  r.lambda = 0.1 + 0.2;
  r.rates = {0.01, 0.03, 0.02};
  EXPECT_EQ(std::string(kReportCsvHeader), "scheme,M,alpha,seed,lambda,p_fa,p_md,epsilon");
  EXPECT_EQ(report_csv_row(r), "CLDAE,3,0.1,4,0.30000000000000004,0.01,0.03,0.02");
  std::ostringstream os;
  write_roc_csv(os, {{0.0, 0.5}, {1.0, 1.0}});
  EXPECT_EQ(os.str(), "p_fa,detection\n0,0.5\n1,1\n");
}
