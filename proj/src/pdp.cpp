#include "uwauth/pdp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <string>

#include "uwauth/errors.hpp"
#include "uwauth/util.hpp"

namespace uwauth::pdp {

void PowerDelayProfile::validate() const {
  if (taps.empty()) throw EmptyInputError("power delay profile has no taps");
  if (!(resolution_s > 0.0)) throw DomainError("profile resolution must be positive");
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (!(taps[i].power >= 0.0) || !std::isfinite(taps[i].power))
      throw DomainError("tap powers must be finite and non-negative");
    if (!std::isfinite(taps[i].delay_s)) throw DomainError("tap delays must be finite");
    if (i > 0 && !(taps[i].delay_s > taps[i - 1].delay_s))
      throw DomainError("tap delays must be strictly increasing");
  }
}

void FeatureExtractionConfig::validate() const {
  if (!(tap_threshold_db > 0.0)) throw ConfigError("tap_threshold_db must be positive");
  if (smoothing_window == 0) throw ConfigError("smoothing_window must be at least 1");
}

std::vector<double> FeatureVector::as_vector() const {
  return {static_cast<double>(num_taps), avg_tap_power, rel_rms_delay_s, smoothed_rx_power};
}

double to_db(double linear_power) { return 10.0 * std::log10(linear_power); }

FeatureVector extract_features(const PowerDelayProfile& pdp, const FeatureExtractionConfig& cfg) {
  pdp.validate();
  cfg.validate();
  double peak = 0.0;
  for (const auto& t : pdp.taps) peak = std::max(peak, t.power);
  if (peak <= 0.0) throw DegenerateDataError("all taps have zero power");

  const double floor = peak * std::pow(10.0, -cfg.tap_threshold_db / 10.0);
  FeatureVector f;
  double power_sum = 0.0, first_delay = 0.0;
  double m1 = 0.0, m2 = 0.0;
  for (const auto& t : pdp.taps) {
    if (t.power <= 0.0 || t.power < floor) continue;
    if (f.num_taps == 0) first_delay = t.delay_s;
    ++f.num_taps;
    const double tau = t.delay_s - first_delay;
    power_sum += t.power;
    m1 += t.power * tau;
    m2 += t.power * tau * tau;
  }
  f.avg_tap_power = power_sum / static_cast<double>(f.num_taps);
  const double mean_delay = m1 / power_sum;
  f.rel_rms_delay_s = std::sqrt(std::max(0.0, m2 / power_sum - mean_delay * mean_delay));

  const std::size_t window = std::min(cfg.smoothing_window, pdp.taps.size());
  double running = 0.0;
  for (std::size_t i = 0; i < window; ++i) running += pdp.taps[i].power;
  double best = running;
  for (std::size_t i = window; i < pdp.taps.size(); ++i) {
    running += pdp.taps[i].power - pdp.taps[i - window].power;
    best = std::max(best, running);
  }
  f.smoothed_rx_power = best / static_cast<double>(window);
  return f;
}

PowerDelayProfile read_pdp_csv(std::istream& is) {
  PowerDelayProfile pdp;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = split(t, ',');
    if (!header) {
      header = true;
      if (cols.size() != 2 || trim(cols[0]) != "delay_s" || trim(cols[1]) != "power_linear")
        throw FormatError("line " + std::to_string(line_no) + ": expected header delay_s,power_linear");
      continue;
    }
    if (cols.size() != 2) throw FormatError("line " + std::to_string(line_no) + ": expected 2 columns");
    pdp.taps.push_back({parse_double(cols[0]), parse_double(cols[1])});
  }
  if (pdp.taps.size() > 1) {
    double step = INFINITY;
    for (std::size_t i = 1; i < pdp.taps.size(); ++i)
      step = std::min(step, pdp.taps[i].delay_s - pdp.taps[i - 1].delay_s);
    if (step > 0.0) pdp.resolution_s = step;
  }
  pdp.validate();
  return pdp;
}

}  // namespace uwauth::pdp
