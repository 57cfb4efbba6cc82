#include "uwauth/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "uwauth/errors.hpp"
#include "uwauth/stats.hpp"
#include "uwauth/util.hpp"

namespace uwauth::datagen {

MarginalBank::MarginalBank(std::size_t sensors, std::size_t features, std::vector<KdeModel> models)
    : sensors_(sensors), features_(features), models_(std::move(models)) {
  if (sensors_ == 0 || features_ == 0) throw ConfigError("marginal bank needs N >= 1 and K >= 1");
  if (models_.size() != sensors_ * features_ * 2)
    throw ConfigError("marginal bank must hold one model per (sensor, feature, class)");
}

std::size_t MarginalBank::index(std::size_t n, std::size_t k, int label) const {
  if (n >= sensors_ || k >= features_ || (label != kAlice && label != kEve))
    throw InputShapeError("marginal bank index out of range");
  return (n * features_ + k) * 2 + static_cast<std::size_t>(label);
}

const KdeModel& MarginalBank::model(std::size_t n, std::size_t k, int label) const {
  return models_[index(n, k, label)];
}

MarginalSampler::MarginalSampler(const MarginalBank& bank)
    : sensors_(bank.sensors()), features_(bank.features()) {
  inverters_.reserve(sensors_ * features_ * 2);
  for (std::size_t n = 0; n < sensors_; ++n)
    for (std::size_t k = 0; k < features_; ++k)
      for (int label : {kEve, kAlice}) inverters_.emplace_back(bank.model(n, k, label));
}

const KdeInverter& MarginalSampler::inverter(std::size_t n, std::size_t k, int label) const {
  if (n >= sensors_ || k >= features_ || (label != kAlice && label != kEve))
    throw InputShapeError("sampler index out of range");
  return inverters_[(n * features_ + k) * 2 + static_cast<std::size_t>(label)];
}

double MarginalSampler::quantile(std::size_t n, std::size_t k, int label, double u) const {
  return inverter(n, k, label).inverse(u);
}

void CopulaSpec::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("copula alpha must lie in [0, 1]");
  if (sensors == 0 || features == 0) throw ConfigError("copula needs N >= 1 and K >= 1");
}

void FeatureDataset::push_back(std::span<const double> row, int label) {
  if (row.size() != row_width()) throw InputShapeError("dataset row has wrong width");
  if (label != kAlice && label != kEve) throw DomainError("labels must be 0 or 1");
  values_.insert(values_.end(), row.begin(), row.end());
  labels_.push_back(label);
}

void FeatureDataset::reserve(std::size_t rows) {
  values_.reserve(rows * row_width());
  labels_.reserve(rows);
}

std::size_t FeatureDataset::count(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

void SplitSpec::validate() const {
  if (train < 0.0 || val < 0.0 || test < 0.0) throw ConfigError("split fractions must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

std::vector<double> sample_copula_matrix(const CopulaSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  std::normal_distribution<double> gauss;
  const double shared = std::sqrt(spec.alpha);
  const double own = std::sqrt(1.0 - spec.alpha);
  std::vector<double> z(spec.features);
  for (auto& v : z) v = gauss(rng);
  std::vector<double> out(spec.sensors * spec.features);
  for (std::size_t n = 0; n < spec.sensors; ++n)
    for (std::size_t k = 0; k < spec.features; ++k) {
      const double w = gauss(rng);
      out[n * spec.features + k] = shared * z[k] + own * w;
    }
  return out;
}

FeatureDataset generate_dataset(const MarginalSampler& sampler, const CopulaSpec& spec,
                                std::size_t count_per_class, std::mt19937_64& rng) {
  spec.validate();
  if (sampler.sensors() != spec.sensors || sampler.features() != spec.features)
    throw InputShapeError("marginal bank dimensions do not match the copula");
  FeatureDataset ds(spec.sensors, spec.features);
  ds.alpha = spec.alpha;
  ds.reserve(2 * count_per_class);
  std::vector<double> row(spec.sensors * spec.features);
  constexpr double u_max = 1.0 - DBL_EPSILON / 2;
  for (int label : {kAlice, kEve}) {
    for (std::size_t r = 0; r < count_per_class; ++r) {
      const auto v = sample_copula_matrix(spec, rng);
      for (std::size_t n = 0; n < spec.sensors; ++n)
        for (std::size_t k = 0; k < spec.features; ++k) {
          const double u = std::clamp(stats::normal_cdf(v[n * spec.features + k]), DBL_MIN, u_max);
          row[n * spec.features + k] = sampler.quantile(n, k, label, u);
        }
      ds.push_back(row, label);
    }
  }
  return ds;
}

FeatureDataset generate_dataset(const MarginalBank& bank, const CopulaSpec& spec,
                                std::size_t count_per_class, std::mt19937_64& rng) {
  return generate_dataset(MarginalSampler(bank), spec, count_per_class, rng);
}

namespace {

FeatureDataset take_rows(const FeatureDataset& ds, const std::vector<std::size_t>& rows) {
  FeatureDataset out(ds.sensors(), ds.features());
  out.alpha = ds.alpha;
  out.provenance = ds.provenance;
  out.reserve(rows.size());
  for (auto i : rows) out.push_back(ds.row(i), ds.label(i));
  return out;
}

}  // namespace

DatasetSplit split_dataset(const FeatureDataset& ds, const SplitSpec& split, std::mt19937_64& rng) {
  split.validate();
  if (ds.empty()) throw EmptyInputError("cannot split an empty dataset");
  std::vector<std::size_t> parts[3];
  for (int label : {kAlice, kEve}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.label(i) == label) idx.push_back(i);
    shuffle_indices(idx, rng);
    const auto total = idx.size();
    const auto n_train = std::min(total, static_cast<std::size_t>(std::llround(split.train * total)));
    const auto n_val = std::min(total - n_train, static_cast<std::size_t>(std::llround(split.val * total)));
    parts[0].insert(parts[0].end(), idx.begin(), idx.begin() + n_train);
    parts[1].insert(parts[1].end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
    parts[2].insert(parts[2].end(), idx.begin() + n_train + n_val, idx.end());
  }
  for (auto& p : parts) shuffle_indices(p, rng);
  return {take_rows(ds, parts[0]), take_rows(ds, parts[1]), take_rows(ds, parts[2])};
}

int hadamard_sign(std::size_t n, std::size_t k) { return std::popcount(n & k) % 2 == 0 ? 1 : -1; }

ReferenceScenario reference_scenario(const std::string& scenario_id) {
  ReferenceScenario s;
  s.id = scenario_id;
  if (scenario_id == "default") return s;
  if (scenario_id == "null") {
    s.separability = 0.0;
    return s;
  }
  throw ConfigError("unknown reference scenario '" + scenario_id + "'");
}

MarginalBank reference_marginals(const std::string& scenario_id, std::size_t sensors, std::size_t features) {
  return reference_marginals(reference_scenario(scenario_id), sensors, features);
}

MarginalBank reference_marginals(const ReferenceScenario& sc, std::size_t sensors, std::size_t features) {
  if (sensors == 0 || features == 0) throw ConfigError("reference marginals need N >= 1 and K >= 1");
  if (sc.draws < 2) throw ConfigError("reference marginals need at least two draws");
  // Feature-wise physical operating points (tap count, average tap power,
  // relative rms delay in ms, smoothed received power); sensors differ in
  // location, scale and mixture weight.
  static constexpr double kLocation[] = {12.0, 0.8, 2.5, 3.0};
  static constexpr double kScale[] = {2.0, 0.15, 0.6, 0.5};
  std::vector<KdeModel> models;
  models.reserve(sensors * features * 2);
  for (std::size_t n = 0; n < sensors; ++n) {
    for (std::size_t k = 0; k < features; ++k) {
      const double loc = kLocation[k % 4] * (1.0 + 0.15 * static_cast<double>(n));
      const double scale = kScale[k % 4] * (1.0 + 0.1 * static_cast<double>((n + k) % 3));
      const double weight = 0.35 + 0.1 * static_cast<double>((n + 2 * k) % 4);
      const double offset = sc.separability * sc.shift * hadamard_sign(n, k) * scale;
      // One stream per (n, k); Alice and Eve reuse it, so separability 0
      // yields identical marginals.
      std::mt19937_64 rng(derive_seed(sc.seed, {n, k}));
      std::vector<double> alice(sc.draws), eve(sc.draws);
      std::bernoulli_distribution low_mode(weight);
      std::normal_distribution<double> gauss;
      for (std::size_t i = 0; i < sc.draws; ++i) {
        const bool pick_low = low_mode(rng);
        const double g = gauss(rng);
        const double mode = pick_low ? -sc.mode_offset : sc.mode_offset;
        const double base = loc + scale * (mode + sc.mode_spread * g);
        alice[i] = base;
        eve[i] = base + offset;
      }
      // Order must match MarginalBank::index: label 0 (Eve) then 1 (Alice).
      models.push_back(fit_kde(eve));
      models.push_back(fit_kde(alice));
    }
  }
  return MarginalBank(sensors, features, std::move(models));
}

MeasuredSeries read_measured_series(std::istream& is) {
  MeasuredSeries out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = split(t, ',');
    if (!header_seen) {
      header_seen = true;
      if (cols.size() != 4 || trim(cols[0]) != "sensor_id" || trim(cols[1]) != "feature_id" ||
          trim(cols[2]) != "class" || trim(cols[3]) != "value")
        throw FormatError("line 1: expected header sensor_id,feature_id,class,value");
      continue;
    }
    if (cols.size() != 4) throw FormatError("line " + std::to_string(line_no) + ": expected 4 columns");
    try {
      const auto n = parse_integer(cols[0]);
      const auto k = parse_integer(cols[1]);
      if (n < 1 || k < 1) throw FormatError("sensor_id and feature_id are 1-based");
      const auto cls = to_lower(trim(cols[2]));
      int label;
      if (cls == "1" || cls == "alice")
        label = kAlice;
      else if (cls == "0" || cls == "eve")
        label = kEve;
      else
        throw FormatError("class must be 1/0 or alice/eve");
      const double v = parse_double(cols[3]);
      if (!std::isfinite(v)) throw FormatError("value must be finite");
      out.sensors = std::max(out.sensors, static_cast<std::size_t>(n));
      out.features = std::max(out.features, static_cast<std::size_t>(k));
      out.series[{static_cast<std::size_t>(n - 1), static_cast<std::size_t>(k - 1), label}].push_back(v);
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.series.empty()) throw EmptyInputError("measured series file has no data rows");
  return out;
}

MeasuredSeries read_measured_series_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open measured series '" + path + "'");
  return read_measured_series(in);
}

MarginalBank fit_marginal_bank(const MeasuredSeries& measured, BandwidthRule rule) {
  std::vector<KdeModel> models;
  for (std::size_t n = 0; n < measured.sensors; ++n)
    for (std::size_t k = 0; k < measured.features; ++k)
      for (int label : {kEve, kAlice}) {
        const auto it = measured.series.find({n, k, label});
        if (it == measured.series.end())
          throw ConfigError("measured series missing sensor " + std::to_string(n + 1) + ", feature " +
                            std::to_string(k + 1) + ", class " + std::to_string(label));
        models.push_back(fit_kde(it->second, rule));
      }
  return MarginalBank(measured.sensors, measured.features, std::move(models));
}

void write_dataset_csv(std::ostream& os, const FeatureDataset& ds) {
  for (std::size_t n = 0; n < ds.sensors(); ++n)
    for (std::size_t k = 0; k < ds.features(); ++k) os << 's' << n + 1 << "_f" << k + 1 << ',';
  os << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) os << format_double(v) << ',';
    os << ds.label(i) << '\n';
  }
}

FeatureDataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset CSV is empty");
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || trim(header.back()) != "label") throw FormatError("dataset CSV: last column must be label");
  std::size_t sensors = 0, features = 0;
  for (std::size_t c = 0; c + 1 < header.size(); ++c) {
    const auto h = trim(header[c]);
    const auto us = h.find("_f");
    if (h.size() < 4 || h.front() != 's' || us == std::string_view::npos)
      throw FormatError("dataset CSV: bad column name '" + std::string(h) + "'");
    const auto n = static_cast<std::size_t>(parse_integer(h.substr(1, us - 1)));
    const auto k = static_cast<std::size_t>(parse_integer(h.substr(us + 2)));
    sensors = std::max(sensors, n);
    features = std::max(features, k);
  }
  if (sensors * features != header.size() - 1) throw FormatError("dataset CSV: columns do not form an N x K grid");
  FeatureDataset ds(sensors, features);
  std::vector<double> row(sensors * features);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split(trim(line), ',');
    if (cols.size() != header.size()) throw FormatError("dataset CSV line " + std::to_string(line_no) + ": wrong column count");
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = parse_double(cols[c]);
    ds.push_back(row, static_cast<int>(parse_integer(cols.back())));
  }
  return ds;
}

}  // namespace uwauth::datagen
