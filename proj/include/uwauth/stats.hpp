#pragma once

// Small statistics toolkit shared by data generation, validation and tests.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace uwauth::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator).
double stddev(std::span<const double> v);
double pearson(std::span<const double> a, std::span<const double> b);
// Ranks starting at 1, ties share their average rank.
std::vector<double> ranks(std::span<const double> v);
double spearman(std::span<const double> a, std::span<const double> b);

// Kolmogorov survival function Q(t) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 t^2).
double kolmogorov_survival(double t);

// One-sample KS statistic sup |F_n - F|.
double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);
double ks_statistic_two_sample(std::span<const double> a, std::span<const double> b);

// Asymptotic p-values with Stephens' small-sample correction.
double ks_pvalue(double d, std::size_t n);
double ks_pvalue_two_sample(double d, std::size_t n, std::size_t m);

}  // namespace uwauth::stats
