#include "uwauth/kde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uwauth/errors.hpp"
#include "uwauth/stats.hpp"

namespace uwauth::datagen {

KdeModel::KdeModel(std::vector<double> centers, double bandwidth)
    : centers_(std::move(centers)), bandwidth_(bandwidth) {
  if (centers_.empty()) throw EmptyInputError("KDE needs at least one center");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw DomainError("KDE bandwidth must be positive");
  for (double c : centers_)
    if (!std::isfinite(c)) throw DomainError("KDE centers must be finite");
  std::sort(centers_.begin(), centers_.end());
}

double silverman_bandwidth(std::span<const double> series) {
  const double n = static_cast<double>(series.size());
  return 1.06 * stats::stddev(series) * std::pow(n, -0.2);
}

KdeModel fit_kde(std::span<const double> series, BandwidthRule rule) {
  if (series.size() < 2) throw DegenerateDataError("KDE fit needs at least two values");
  for (double v : series)
    if (!std::isfinite(v)) throw DomainError("KDE fit: series contains non-finite values");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) throw DegenerateDataError("KDE fit: series has zero variance");
  const double h = rule.kind == BandwidthRule::Kind::Fixed ? rule.value : silverman_bandwidth(series);
  return KdeModel(std::vector<double>(series.begin(), series.end()), h);
}

namespace {

struct Window {
  std::size_t below;  // centers entirely below the window
  std::size_t begin;
  std::size_t end;
};

Window kernel_window(const KdeModel& m, double x) {
  const auto& c = m.centers();
  const double reach = kKernelCutoff * m.bandwidth();
  const auto first = std::lower_bound(c.begin(), c.end(), x - reach);
  const auto last = std::upper_bound(first, c.end(), x + reach);
  const auto b = static_cast<std::size_t>(first - c.begin());
  return {b, b, static_cast<std::size_t>(last - c.begin())};
}

}  // namespace

double kde_pdf(const KdeModel& model, double x) {
  const auto w = kernel_window(model, x);
  const double h = model.bandwidth();
  const auto& c = model.centers();
  double sum = 0.0;
  for (std::size_t i = w.begin; i < w.end; ++i) sum += stats::normal_pdf((x - c[i]) / h);
  return sum / (static_cast<double>(model.count()) * h);
}

double kde_cdf(const KdeModel& model, double x) {
  const auto w = kernel_window(model, x);
  const double h = model.bandwidth();
  const auto& c = model.centers();
  double sum = static_cast<double>(w.below);
  for (std::size_t i = w.begin; i < w.end; ++i) sum += stats::normal_cdf((x - c[i]) / h);
  return std::min(1.0, sum / static_cast<double>(model.count()));
}

double kde_inverse_cdf(const KdeModel& model, double u, double tol) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("inverse cdf needs 0 < u < 1, got " + std::to_string(u));
  if (!(tol > 0.0)) throw DomainError("inverse cdf tolerance must be positive");
  const double h = model.bandwidth();
  double lo = model.min_center() - 10.0 * h;
  double hi = model.max_center() + 10.0 * h;
  while (kde_cdf(model, lo) > u) lo -= (hi - lo);
  while (kde_cdf(model, hi) < u) hi += (hi - lo);
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 2000; ++iter) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket exhausted at double resolution
    const double f = kde_cdf(model, mid);
    if (std::abs(f - u) <= tol) return mid;
    if (f < u)
      lo = mid;
    else
      hi = mid;
  }
  return mid;
}

KdeInverter::KdeInverter(KdeModel model, double spacing_in_bandwidths) : model_(std::move(model)) {
  if (!(spacing_in_bandwidths > 0.0)) throw DomainError("KdeInverter spacing must be positive");
  const double h = model_.bandwidth();
  origin_ = model_.min_center() - kKernelCutoff * h;
  const double span = model_.max_center() + kKernelCutoff * h - origin_;
  step_ = spacing_in_bandwidths * h;
  constexpr double max_nodes = 1 << 21;
  if (span / step_ > max_nodes) step_ = span / max_nodes;
  const auto nodes = static_cast<std::size_t>(std::ceil(span / step_)) + 1;
  cdf_.resize(nodes);
  pdf_.resize(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const double x = origin_ + static_cast<double>(j) * step_;
    cdf_[j] = kde_cdf(model_, x);
    pdf_[j] = kde_pdf(model_, x);
  }
}

double KdeInverter::hermite(std::size_t j, double t) const {
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * cdf_[j] + h10 * step_ * pdf_[j] + h01 * cdf_[j + 1] + h11 * step_ * pdf_[j + 1];
}

double KdeInverter::hermite_slope(std::size_t j, double t) const {
  const double t2 = t * t;
  const double d00 = 6 * t2 - 6 * t, d10 = 3 * t2 - 4 * t + 1;
  const double d01 = -6 * t2 + 6 * t, d11 = 3 * t2 - 2 * t;
  return d00 * cdf_[j] + d10 * step_ * pdf_[j] + d01 * cdf_[j + 1] + d11 * step_ * pdf_[j + 1];
}

double KdeInverter::cdf(double x) const {
  const double pos = (x - origin_) / step_;
  if (pos <= 0.0 || pos >= static_cast<double>(cdf_.size() - 1)) return kde_cdf(model_, x);
  const auto j = static_cast<std::size_t>(pos);
  return hermite(j, pos - static_cast<double>(j));
}

double KdeInverter::inverse(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("inverse cdf needs 0 < u < 1");
  if (u <= cdf_.front() || u >= cdf_.back()) return kde_inverse_cdf(model_, u);
  // cdf_[j] <= u < cdf_[j + 1]
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto j = static_cast<std::size_t>(it - cdf_.begin()) - 1;
  double lo = 0.0, hi = 1.0;
  double t = (u - cdf_[j]) / (cdf_[j + 1] - cdf_[j]);
  for (int iter = 0; iter < 60; ++iter) {
    const double r = hermite(j, t) - u;
    if (r == 0.0) break;
    if (r < 0.0)
      lo = t;
    else
      hi = t;
    const double slope = hermite_slope(j, t);
    double next = slope > 0.0 ? t - r / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) < 1e-15) {
      t = next;
      break;
    }
    t = next;
  }
  return origin_ + (static_cast<double>(j) + t) * step_;
}

}  // namespace uwauth::datagen
