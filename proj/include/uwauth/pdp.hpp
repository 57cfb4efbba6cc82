#pragma once

// Channel features from an estimated power delay profile.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace uwauth::pdp {

struct Tap {
  double delay_s = 0.0;
  double power = 0.0;  // linear
};

struct PowerDelayProfile {
  std::vector<Tap> taps;       // strictly increasing delays
  double resolution_s = 10e-6;

  void validate() const;
};

struct FeatureExtractionConfig {
  double tap_threshold_db = 20.0;  // taps within this many dB of the strongest count
  std::size_t smoothing_window = 3;

  void validate() const;
};

struct FeatureVector {
  std::size_t num_taps = 0;
  double avg_tap_power = 0.0;
  double rel_rms_delay_s = 0.0;
  double smoothed_rx_power = 0.0;

  std::vector<double> as_vector() const;
};

// Taps count when 10*log10(P / P_max) >= -threshold. The rms delay is the
// power-weighted spread of counted-tap delays measured from the first
// counted tap. Smoothed power is the largest moving average over
// consecutive taps; the window shrinks to the tap count for short profiles.
FeatureVector extract_features(const PowerDelayProfile& pdp, const FeatureExtractionConfig& cfg = {});

double to_db(double linear_power);

// CSV "delay_s,power_linear" with header; resolution is the smallest delay
// step (or the default when only one tap is present).
PowerDelayProfile read_pdp_csv(std::istream& is);

}  // namespace uwauth::pdp
