#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "uwauth/errors.hpp"
#include "uwauth/pdp.hpp"

using namespace uwauth;
using namespace uwauth::pdp;

namespace {

PowerDelayProfile random_profile(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> power(1.0);
  PowerDelayProfile p;
  double delay = 1e-3 * static_cast<double>(seed % 7);
  for (int i = 0; i < 40; ++i) {
    p.taps.push_back({delay, power(rng) * std::exp(-0.1 * i)});
    delay += 10e-6 * static_cast<double>(1 + rng() % 3);
  }
  return p;
}

}  // namespace

TEST(Features, PointChannel) {
  const auto f = extract_features({{{0.0, 1.0}}});
  EXPECT_EQ(f.num_taps, 1u);
  EXPECT_DOUBLE_EQ(f.avg_tap_power, 1.0);
  EXPECT_DOUBLE_EQ(f.rel_rms_delay_s, 0.0);
  EXPECT_DOUBLE_EQ(f.smoothed_rx_power, 1.0);
}

TEST(Features, TwoEqualTapsRmsDelay) {
  const auto f = extract_features({{{0.0, 1.0}, {10e-6, 1.0}}}, {20.0, 1});
  // sqrt(E[tau^2] - E[tau]^2) = sqrt(50 - 25) us.
  EXPECT_NEAR(f.rel_rms_delay_s, 5e-6, 1e-18);
  EXPECT_EQ(f.num_taps, 2u);
  EXPECT_DOUBLE_EQ(f.smoothed_rx_power, 1.0);
}

TEST(Features, WeakTapBelowThresholdIsDropped) {
  // 0.001 is -30 dB relative to the peak.
  const auto f = extract_features({{{0.0, 1.0}, {10e-6, 0.001}}}, {20.0, 3});
  EXPECT_EQ(f.num_taps, 1u);
  EXPECT_DOUBLE_EQ(f.avg_tap_power, 1.0);
  EXPECT_NEAR(to_db(0.001), -30.0, 1e-12);
  const auto g = extract_features({{{0.0, 1.0}, {10e-6, 0.001}}}, {40.0, 3});
  EXPECT_EQ(g.num_taps, 2u);
}

TEST(Features, RmsDelayReferencedToFirstCountedTap) {
  // Leading weak tap is below threshold, so it does not anchor the delays.
  const auto f = extract_features({{{0.0, 1e-6}, {20e-6, 1.0}, {40e-6, 1.0}}}, {20.0, 1});
  EXPECT_EQ(f.num_taps, 2u);
  EXPECT_NEAR(f.rel_rms_delay_s, 10e-6, 1e-18);
}

TEST(Features, SmoothedPowerIsBestMovingAverage) {
  const auto f = extract_features({{{0.0, 1.0}, {1e-5, 4.0}, {2e-5, 1.0}, {3e-5, 0.5}, {4e-5, 3.0}}}, {30.0, 2});
  // Windows of two: 2.5, 2.5, 0.75, 1.75.
  EXPECT_DOUBLE_EQ(f.smoothed_rx_power, 2.5);
  const auto wide = extract_features({{{0.0, 1.0}, {1e-5, 3.0}}}, {30.0, 5});
  EXPECT_DOUBLE_EQ(wide.smoothed_rx_power, 2.0);
}

TEST(Features, PowerScalingInvariance) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = random_profile(seed);
    const auto f = extract_features(p);
    const double c = 3.7;
    for (auto& t : p.taps) t.power *= c;
    const auto g = extract_features(p);
    EXPECT_EQ(f.num_taps, g.num_taps);
    EXPECT_NEAR(g.rel_rms_delay_s, f.rel_rms_delay_s, 1e-12 * (1 + f.rel_rms_delay_s));
    EXPECT_NEAR(g.avg_tap_power, c * f.avg_tap_power, 1e-12 * g.avg_tap_power);
    EXPECT_NEAR(g.smoothed_rx_power, c * f.smoothed_rx_power, 1e-12 * g.smoothed_rx_power);
  }
}

TEST(Features, DelayShiftInvariance) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = random_profile(seed);
    const auto f = extract_features(p);
    for (auto& t : p.taps) t.delay_s += 0.25;
    const auto g = extract_features(p);
    EXPECT_EQ(f.num_taps, g.num_taps);
    EXPECT_DOUBLE_EQ(f.avg_tap_power, g.avg_tap_power);
    EXPECT_NEAR(g.rel_rms_delay_s, f.rel_rms_delay_s, 1e-12);
    EXPECT_DOUBLE_EQ(f.smoothed_rx_power, g.smoothed_rx_power);
  }
}

TEST(Features, VectorOrder) {
  const auto v = extract_features({{{0.0, 2.0}, {1e-5, 2.0}}}, {20.0, 1}).as_vector();
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0], 2.0);
  EXPECT_EQ(v[1], 2.0);
  EXPECT_NEAR(v[2], 5e-6, 1e-18);
  EXPECT_EQ(v[3], 2.0);
}

TEST(Features, Errors) {
  EXPECT_THROW(extract_features({{{0.0, 0.0}, {1e-5, 0.0}}}), DegenerateDataError);
  EXPECT_THROW(extract_features({{}}), EmptyInputError);
  EXPECT_THROW(extract_features({{{1e-5, 1.0}, {0.0, 1.0}}}), DomainError);
  EXPECT_THROW(extract_features({{{0.0, -1.0}}}), DomainError);
  EXPECT_THROW(extract_features({{{0.0, 1.0}}}, {0.0, 3}), ConfigError);
  EXPECT_THROW(extract_features({{{0.0, 1.0}}}, {20.0, 0}), ConfigError);
}

TEST(PdpCsv, ReadsProfileAndResolution) {
  std::istringstream in("delay_s,power_linear\n0,1\n2e-5,0.5\n3e-5,0.25\n");
  const auto p = read_pdp_csv(in);
  ASSERT_EQ(p.taps.size(), 3u);
  EXPECT_DOUBLE_EQ(p.resolution_s, 1e-5);
  EXPECT_DOUBLE_EQ(p.taps[1].power, 0.5);
  std::istringstream bad("delay,power\n0,1\n");
  EXPECT_THROW(read_pdp_csv(bad), FormatError);
  std::istringstream short_row("delay_s,power_linear\n0\n");
  EXPECT_THROW(read_pdp_csv(short_row), FormatError);
}
