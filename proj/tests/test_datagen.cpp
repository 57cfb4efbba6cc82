#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "uwauth/datagen.hpp"
#include "uwauth/errors.hpp"
#include "uwauth/stats.hpp"

using namespace uwauth;
using namespace uwauth::datagen;

namespace {

// Small bank: N sensors, K features, Eve shifted by +1.
MarginalBank toy_bank(std::size_t sensors, std::size_t features, double shift = 1.0) {
  std::vector<KdeModel> models;
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g;
  for (std::size_t n = 0; n < sensors; ++n)
    for (std::size_t k = 0; k < features; ++k) {
      std::vector<double> base(200);
      for (auto& v : base) v = g(rng) * (1.0 + 0.2 * static_cast<double>(k)) + static_cast<double>(n);
      auto eve = base;
      for (auto& v : eve) v += shift;
      models.push_back(fit_kde(eve));   // label 0
      models.push_back(fit_kde(base));  // label 1
    }
  return MarginalBank(sensors, features, std::move(models));
}

std::vector<double> column(const FeatureDataset& ds, std::size_t n, std::size_t k, int label) {
  std::vector<double> out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.label(i) == label) out.push_back(ds.value(i, n, k));
  return out;
}

FeatureDataset counting_dataset(std::size_t per_class) {
  FeatureDataset ds(1, 1);
  for (int label : {kAlice, kEve})
    for (std::size_t i = 0; i < per_class; ++i) {
      const double v = static_cast<double>(i) + (label == kAlice ? 0.0 : 0.5);
      ds.push_back({&v, 1}, label);
    }
  return ds;
}

double bayes_error(const KdeModel& a, const KdeModel& e) {
  const double lo = std::min(a.min_center(), e.min_center()) - 12 * std::max(a.bandwidth(), e.bandwidth());
  const double hi = std::max(a.max_center(), e.max_center()) + 12 * std::max(a.bandwidth(), e.bandwidth());
  const int n = 4000;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    s += w * std::min(kde_pdf(a, x), kde_pdf(e, x));
  }
  return 0.5 * s * h;
}

}  // namespace

TEST(MarginalBank, IndexingAndCompleteness) {
  const auto bank = toy_bank(2, 3);
  EXPECT_EQ(bank.index(1, 2, kAlice), (1 * 3 + 2) * 2 + 1);
  EXPECT_LT(bank.model(0, 0, kAlice).min_center(), bank.model(0, 0, kEve).min_center());
  EXPECT_THROW(bank.model(2, 0, kAlice), InputShapeError);
  EXPECT_THROW(MarginalBank(2, 2, {KdeModel({0.0}, 1.0)}), ConfigError);
}

TEST(Copula, AlphaOneGivesEqualColumns) {
  std::mt19937_64 rng(1);
  for (int r = 0; r < 1000; ++r) {
    const auto v = sample_copula_matrix({1.0, 3, 4}, rng);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(v[0 * 4 + k], v[1 * 4 + k]);
      EXPECT_EQ(v[0 * 4 + k], v[2 * 4 + k]);
    }
  }
}

TEST(Copula, CovarianceMatchesEquicorrelation) {
  const std::size_t draws = 200000;
  for (double alpha : {0.0, 0.5}) {
    std::mt19937_64 rng(2);
    double c01 = 0, c00 = 0, cross_k = 0, m0 = 0;
    for (std::size_t i = 0; i < draws; ++i) {
      const auto v = sample_copula_matrix({alpha, 2, 2}, rng);
      c01 += v[0] * v[2];
      c00 += v[0] * v[0];
      cross_k += v[0] * v[1];
      m0 += v[0];
    }
    const double n = static_cast<double>(draws);
    EXPECT_NEAR(c01 / n, alpha, 0.015);
    EXPECT_NEAR(c00 / n, 1.0, 0.015);
    EXPECT_NEAR(cross_k / n, 0.0, 0.015);
    EXPECT_NEAR(m0 / n, 0.0, 0.01);
  }
}

TEST(Copula, RejectsBadSpec) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_copula_matrix({1.5, 3, 4}, rng), DomainError);
  EXPECT_THROW(sample_copula_matrix({0.5, 0, 4}, rng), ConfigError);
}

TEST(Generate, ShapeLabelsAndDeterminism) {
  const auto bank = toy_bank(3, 2);
  const MarginalSampler sampler(bank);
  std::mt19937_64 r1(5), r2(5);
  const auto a = generate_dataset(sampler, {0.3, 3, 2}, 500, r1);
  const auto b = generate_dataset(sampler, {0.3, 3, 2}, 500, r2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 1000u);
  EXPECT_EQ(a.count(kAlice), 500u);
  EXPECT_EQ(a.label(0), kAlice);
  EXPECT_EQ(a.label(999), kEve);
  EXPECT_EQ(a.row_width(), 6u);
  EXPECT_DOUBLE_EQ(a.alpha, 0.3);
  std::mt19937_64 r3(5);
  EXPECT_THROW(generate_dataset(sampler, {0.3, 2, 2}, 10, r3), InputShapeError);
}

TEST(Generate, MarginalsFollowTheirKde) {
  const auto bank = toy_bank(2, 2);
  std::mt19937_64 rng(6);
  const auto ds = generate_dataset(bank, {0.7, 2, 2}, 10000, rng);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t k = 0; k < 2; ++k)
      for (int label : {kAlice, kEve}) {
        const auto col = column(ds, n, k, label);
        const auto& m = bank.model(n, k, label);
        const double d = stats::ks_statistic(col, [&](double x) { return kde_cdf(m, x); });
        EXPECT_GT(stats::ks_pvalue(d, col.size()), 0.01) << n << k << label;
      }
}

TEST(Generate, AlphaOneIsComonotone) {
  const auto bank = toy_bank(3, 2);
  std::mt19937_64 rng(7);
  const auto ds = generate_dataset(bank, {1.0, 3, 2}, 2000, rng);
  for (int label : {kAlice, kEve})
    for (std::size_t k = 0; k < 2; ++k)
      EXPECT_NEAR(stats::spearman(column(ds, 0, k, label), column(ds, 2, k, label)), 1.0, 1e-12);
}

TEST(Generate, RankCorrelationAtHalf) {
  const auto bank = toy_bank(2, 1);
  std::mt19937_64 rng(8);
  const auto ds = generate_dataset(bank, {0.5, 2, 1}, 50000, rng);
  const double want = 6.0 / M_PI * std::asin(0.25);
  EXPECT_NEAR(want, 0.4826, 1e-4);
  for (int label : {kAlice, kEve})
    EXPECT_NEAR(stats::spearman(column(ds, 0, 0, label), column(ds, 1, 0, label)), want, 0.03);
}

TEST(Generate, MarginalsDoNotDependOnAlpha) {
  const auto bank = toy_bank(2, 1);
  const MarginalSampler sampler(bank);
  std::mt19937_64 r1(9), r2(10);
  const auto a = generate_dataset(sampler, {0.0, 2, 1}, 10000, r1);
  const auto b = generate_dataset(sampler, {0.9, 2, 1}, 10000, r2);
  for (std::size_t n = 0; n < 2; ++n) {
    const auto ca = column(a, n, 0, kAlice), cb = column(b, n, 0, kAlice);
    const double d = stats::ks_statistic_two_sample(ca, cb);
    EXPECT_GT(stats::ks_pvalue_two_sample(d, ca.size(), cb.size()), 0.01);
  }
}

TEST(Split, SixtyFifteenTwentyFiveProportions) {
  const auto ds = counting_dataset(100000);
  std::mt19937_64 rng(1);
  const auto s = split_dataset(ds, {0.6, 0.15, 0.25}, rng);
  for (int label : {kAlice, kEve}) {
    EXPECT_NEAR(static_cast<double>(s.train.count(label)), 60000.0, 1.0);
    EXPECT_NEAR(static_cast<double>(s.val.count(label)), 15000.0, 1.0);
    EXPECT_NEAR(static_cast<double>(s.test.count(label)), 25000.0, 1.0);
  }
}

TEST(Split, AllToTrain) {
  const auto ds = counting_dataset(50);
  std::mt19937_64 rng(1);
  const auto s = split_dataset(ds, {1.0, 0.0, 0.0}, rng);
  EXPECT_EQ(s.train.size(), 100u);
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(Split, UnionIsTheOriginalMultiset) {
  const auto ds = counting_dataset(997);
  std::mt19937_64 rng(3);
  const auto s = split_dataset(ds, {0.5, 0.2, 0.3}, rng);
  std::vector<std::pair<double, int>> before, after;
  for (std::size_t i = 0; i < ds.size(); ++i) before.emplace_back(ds.row(i)[0], ds.label(i));
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (std::size_t i = 0; i < part->size(); ++i) after.emplace_back(part->row(i)[0], part->label(i));
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(before, after);
}

TEST(Split, Errors) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(split_dataset(FeatureDataset(1, 1), {}, rng), EmptyInputError);
  EXPECT_THROW(split_dataset(counting_dataset(5), {0.5, 0.5, 0.5}, rng), ConfigError);
  EXPECT_THROW(split_dataset(counting_dataset(5), {1.2, -0.2, 0.0}, rng), ConfigError);
}

TEST(Reference, DeterministicAndKnownIds) {
  EXPECT_EQ(reference_marginals("default", 2, 2), reference_marginals("default", 2, 2));
  EXPECT_THROW(reference_marginals("harbour", 3, 4), ConfigError);
}

TEST(Reference, HadamardSignsAreOrthogonalRows) {
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      int dot = 0;
      for (std::size_t k = 0; k < 4; ++k) dot += hadamard_sign(a, k) * hadamard_sign(b, k);
      EXPECT_EQ(dot, a == b ? 4 : 0);
    }
}

TEST(Reference, ZeroSeparabilityMakesClassesIndistinguishable) {
  const auto bank = reference_marginals("null", 3, 4);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(bank.model(n, k, kAlice), bank.model(n, k, kEve));
  std::mt19937_64 rng(2);
  const auto ds = generate_dataset(bank, {0.0, 3, 4}, 5000, rng);
  const auto a = column(ds, 1, 2, kAlice), e = column(ds, 1, 2, kEve);
  EXPECT_GT(stats::ks_pvalue_two_sample(stats::ks_statistic_two_sample(a, e), a.size(), e.size()), 0.01);
}

TEST(Reference, SingleFeatureBayesErrorIsModerate) {
  const auto bank = reference_marginals("default", 3, 4);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t k = 0; k < 4; ++k) {
      const double err = bayes_error(bank.model(n, k, kAlice), bank.model(n, k, kEve));
      EXPECT_GE(err, 0.05) << "sensor " << n << " feature " << k;
      EXPECT_LE(err, 0.25) << "sensor " << n << " feature " << k;
    }
}

TEST(MeasuredSeries, ParseAndFit) {
  std::ostringstream csv;
  csv << "sensor_id,feature_id,class,value\n";
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int n = 1; n <= 2; ++n)
    for (int k = 1; k <= 2; ++k)
      for (const char* cls : {"alice", "0"})
        for (int i = 0; i < 30; ++i) csv << n << ',' << k << ',' << cls << ',' << g(rng) << '\n';
  std::istringstream in(csv.str());
  const auto series = read_measured_series(in);
  EXPECT_EQ(series.sensors, 2u);
  EXPECT_EQ(series.features, 2u);
  const auto bank = fit_marginal_bank(series);
  EXPECT_EQ(bank.model(1, 1, kEve).count(), 30u);
}

TEST(MeasuredSeries, Errors) {
  std::istringstream bad_header("a,b,c,d\n1,1,1,0.5\n");
  EXPECT_THROW(read_measured_series(bad_header), FormatError);
  std::istringstream bad_class("sensor_id,feature_id,class,value\n1,1,bob,0.5\n");
  EXPECT_THROW(read_measured_series(bad_class), FormatError);
  std::istringstream incomplete("sensor_id,feature_id,class,value\n1,1,1,0.5\n1,1,1,0.7\n2,1,0,0.5\n2,1,0,0.9\n");
  EXPECT_THROW(fit_marginal_bank(read_measured_series(incomplete)), ConfigError);
  EXPECT_THROW(read_measured_series_file("/nonexistent/series.csv"), ConfigError);
}

TEST(DatasetCsv, RoundTripIsExact) {
  const auto bank = toy_bank(2, 3);
  std::mt19937_64 rng(4);
  const auto ds = generate_dataset(bank, {0.4, 2, 3}, 50, rng);
  std::stringstream ss;
  write_dataset_csv(ss, ds);
  const auto header = ss.str().substr(0, ss.str().find('\n'));
  EXPECT_EQ(header, "s1_f1,s1_f2,s1_f3,s2_f1,s2_f2,s2_f3,label");
  const auto back = read_dataset_csv(ss);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.values(), ds.values());
  EXPECT_EQ(back.labels(), ds.labels());
}
