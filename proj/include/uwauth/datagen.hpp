#pragma once

// Synthetic feature datasets: per-(sensor, feature, class) KDE marginals tied
// together across sensors by an equicorrelated Gaussian copula.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "uwauth/kde.hpp"

namespace uwauth::datagen {

// Hypothesis labels: 1 = legitimate transmitter (Alice), 0 = impersonator (Eve).
inline constexpr int kAlice = 1;
inline constexpr int kEve = 0;

class MarginalBank {
 public:
  // models[index(n, k, label)], complete over all triples.
  MarginalBank(std::size_t sensors, std::size_t features, std::vector<KdeModel> models);

  std::size_t sensors() const noexcept { return sensors_; }
  std::size_t features() const noexcept { return features_; }
  const KdeModel& model(std::size_t n, std::size_t k, int label) const;
  std::size_t index(std::size_t n, std::size_t k, int label) const;

  bool operator==(const MarginalBank&) const = default;

 private:
  std::size_t sensors_;
  std::size_t features_;
  std::vector<KdeModel> models_;
};

// Precomputed inverse-cdf tables for every marginal of a bank. Immutable and
// safe to share between threads.
class MarginalSampler {
 public:
  explicit MarginalSampler(const MarginalBank& bank);

  std::size_t sensors() const noexcept { return sensors_; }
  std::size_t features() const noexcept { return features_; }
  double quantile(std::size_t n, std::size_t k, int label, double u) const;
  const KdeInverter& inverter(std::size_t n, std::size_t k, int label) const;

 private:
  std::size_t sensors_;
  std::size_t features_;
  std::vector<KdeInverter> inverters_;
};

struct CopulaSpec {
  double alpha = 0.0;
  std::size_t sensors = 3;
  std::size_t features = 4;

  void validate() const;
};

// Rows of sensor-major N x K feature matrices with a binary label.
class FeatureDataset {
 public:
  FeatureDataset() = default;
  FeatureDataset(std::size_t sensors, std::size_t features) : sensors_(sensors), features_(features) {}

  std::size_t sensors() const noexcept { return sensors_; }
  std::size_t features() const noexcept { return features_; }
  std::size_t row_width() const noexcept { return sensors_ * features_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * row_width(), row_width()}; }
  std::span<const double> sensor_row(std::size_t i, std::size_t n) const {
    return {values_.data() + i * row_width() + n * features_, features_};
  }
  double value(std::size_t i, std::size_t n, std::size_t k) const {
    return values_[i * row_width() + n * features_ + k];
  }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<double>& values() const noexcept { return values_; }

  void push_back(std::span<const double> row, int label);
  void reserve(std::size_t rows);
  std::size_t count(int label) const;

  double alpha = 0.0;
  std::string provenance;

  bool operator==(const FeatureDataset&) const = default;

 private:
  std::size_t sensors_ = 0;
  std::size_t features_ = 0;
  std::vector<double> values_;
  std::vector<int> labels_;
};

struct SplitSpec {
  double train = 0.6;
  double val = 0.15;
  double test = 0.25;

  void validate() const;
};

struct DatasetSplit {
  FeatureDataset train;
  FeatureDataset val;
  FeatureDataset test;
};

// N x K (row-major) standard normals where, for each feature k, the sensor
// entries share a common factor: v[n][k] = sqrt(a) z[k] + sqrt(1 - a) w[n][k].
// Draw order (z then w) does not depend on alpha, so one seed gives common
// random numbers across an alpha sweep.
std::vector<double> sample_copula_matrix(const CopulaSpec& spec, std::mt19937_64& rng);

// Alice rows first, then Eve rows; each entry is Phi(v) pushed through the
// class marginal's inverse cdf.
FeatureDataset generate_dataset(const MarginalSampler& sampler, const CopulaSpec& spec,
                                std::size_t count_per_class, std::mt19937_64& rng);
FeatureDataset generate_dataset(const MarginalBank& bank, const CopulaSpec& spec,
                                std::size_t count_per_class, std::mt19937_64& rng);

// Per-class shuffled partition; each part is shuffled again after merging.
DatasetSplit split_dataset(const FeatureDataset& ds, const SplitSpec& split, std::mt19937_64& rng);

// Stand-in for measured channel statistics. Alice's marginal for (n, k) is a
// two-component Gaussian mixture; Eve's is the same mixture shifted by
// separability * shift * sign(n, k) * scale(n, k), where the signs follow
// rows of a Sylvester-Hadamard matrix so that sensors disagree on the shift
// direction feature by feature. Each marginal is a Silverman KDE over
// `draws` deterministic mixture samples.
struct ReferenceScenario {
  std::string id = "default";
  double separability = 1.0;
  double shift = 0.9;           // Eve offset, in units of the per-(n,k) scale
  double mode_offset = 2.0;     // mixture components at -/+ this, in scale units
  double mode_spread = 0.45;    // component standard deviation, in scale units
  std::size_t draws = 5000;
  std::uint64_t seed = 0x5ea5eed;
};

ReferenceScenario reference_scenario(const std::string& scenario_id);
MarginalBank reference_marginals(const std::string& scenario_id, std::size_t sensors, std::size_t features);
MarginalBank reference_marginals(const ReferenceScenario& scenario, std::size_t sensors, std::size_t features);

int hadamard_sign(std::size_t n, std::size_t k);

// Measured series keyed by (sensor, feature, label), zero-based.
struct MeasuredSeries {
  std::size_t sensors = 0;
  std::size_t features = 0;
  std::map<std::tuple<std::size_t, std::size_t, int>, std::vector<double>> series;
};

// CSV with header "sensor_id,feature_id,class,value"; ids are 1-based, class
// is 1/0 or alice/eve.
MeasuredSeries read_measured_series(std::istream& is);
MeasuredSeries read_measured_series_file(const std::string& path);
MarginalBank fit_marginal_bank(const MeasuredSeries& measured, BandwidthRule rule = BandwidthRule::silverman());

// Header s{n}_f{k} (1-based) for every entry, then "label"; shortest
// round-trip decimals.
void write_dataset_csv(std::ostream& os, const FeatureDataset& ds);
FeatureDataset read_dataset_csv(std::istream& is);

}  // namespace uwauth::datagen
