#pragma once

// Univariate Gaussian kernel density estimates: fitting, pdf/cdf and
// inverse-cdf evaluation.

#include <cstddef>
#include <span>
#include <vector>

namespace uwauth::datagen {

struct BandwidthRule {
  enum class Kind { Silverman, Fixed };
  Kind kind = Kind::Silverman;
  double value = 0.0;  // used by Kind::Fixed

  static BandwidthRule silverman() { return {}; }
  static BandwidthRule fixed(double h) { return {Kind::Fixed, h}; }
};

class KdeModel {
 public:
  // Centers are stored sorted; evaluation does not depend on their order.
  KdeModel(std::vector<double> centers, double bandwidth);

  const std::vector<double>& centers() const noexcept { return centers_; }
  double bandwidth() const noexcept { return bandwidth_; }
  std::size_t count() const noexcept { return centers_.size(); }
  double min_center() const noexcept { return centers_.front(); }
  double max_center() const noexcept { return centers_.back(); }

  bool operator==(const KdeModel&) const = default;

 private:
  std::vector<double> centers_;
  double bandwidth_;
};

// 1.06 * sample stddev * n^(-1/5).
double silverman_bandwidth(std::span<const double> series);

KdeModel fit_kde(std::span<const double> series, BandwidthRule rule = BandwidthRule::silverman());

// Kernels farther than this many bandwidths from x are treated as fully
// below (cdf 1) or above (cdf 0); the neglected mass is below 1e-32.
inline constexpr double kKernelCutoff = 12.0;

double kde_pdf(const KdeModel& model, double x);
double kde_cdf(const KdeModel& model, double x);

// Bisection on the monotone cdf until |cdf(x) - u| <= tol. The starting
// bracket [min - 10h, max + 10h] is widened when it does not contain u.
double kde_inverse_cdf(const KdeModel& model, double u, double tol = 1e-10);

// Dense table of exact cdf/pdf values with cubic Hermite interpolation in
// between, for bulk inverse-transform sampling. With node spacing h/100 the
// interpolated cdf stays within ~4e-11 of the exact one; inputs outside the
// table fall back to kde_inverse_cdf.
class KdeInverter {
 public:
  explicit KdeInverter(KdeModel model, double spacing_in_bandwidths = 0.01);

  double cdf(double x) const;
  double inverse(double u) const;

  const KdeModel& model() const noexcept { return model_; }
  std::size_t node_count() const noexcept { return cdf_.size(); }

 private:
  double hermite(std::size_t j, double t) const;
  double hermite_slope(std::size_t j, double t) const;

  KdeModel model_;
  double origin_ = 0.0;
  double step_ = 0.0;
  std::vector<double> cdf_;
  std::vector<double> pdf_;
};

}  // namespace uwauth::datagen
