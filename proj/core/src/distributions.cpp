#include "steinflow/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "steinflow/error.hpp"

namespace steinflow {
namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

Distribution1D Distribution1D::normal(double mean, double stddev) {
  return mixture({{1.0, mean, stddev}});
}

Distribution1D Distribution1D::uniform(double lo, double hi) {
  if (!(hi > lo)) throw InvalidParameter("uniform law needs lo < hi");
  Distribution1D d;
  d.uniform_ = true;
  d.lo_ = lo;
  d.hi_ = hi;
  return d;
}

Distribution1D Distribution1D::mixture(std::vector<Component> components) {
  if (components.empty()) throw InvalidParameter("mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !(c.stddev > 0.0) || !std::isfinite(c.mean)) {
      throw InvalidParameter("mixture components need positive weight and standard deviation");
    }
    total += c.weight;
  }
  for (auto& c : components) c.weight /= total;
  Distribution1D d;
  d.components_ = std::move(components);
  return d;
}

Distribution1D Distribution1D::from_parameters(const std::string& family,
                                               const std::vector<double>& p) {
  if (family == "normal") {
    if (p.size() != 2) throw InvalidParameter("normal law takes 2 parameters (mean, std)");
    return normal(p[0], p[1]);
  }
  if (family == "uniform") {
    if (p.size() != 2) throw InvalidParameter("uniform law takes 2 parameters (lo, hi)");
    return uniform(p[0], p[1]);
  }
  if (family == "mixture") {
    if (p.empty() || p.size() % 3 != 0) {
      throw InvalidParameter("mixture takes (weight, mean, std) triples");
    }
    std::vector<Component> comps;
    for (std::size_t i = 0; i < p.size(); i += 3) comps.push_back({p[i], p[i + 1], p[i + 2]});
    return mixture(std::move(comps));
  }
  throw InvalidParameter("unknown initial law '" + family + "'");
}

double Distribution1D::pdf(double x) const {
  if (uniform_) return (x >= lo_ && x <= hi_) ? 1.0 / (hi_ - lo_) : 0.0;
  double v = 0.0;
  for (const auto& c : components_) v += c.weight * normal_pdf((x - c.mean) / c.stddev) / c.stddev;
  return v;
}

double Distribution1D::pdf_derivative(double x) const {
  if (uniform_) return 0.0;
  double v = 0.0;
  for (const auto& c : components_) {
    const double z = (x - c.mean) / c.stddev;
    v -= c.weight * z * normal_pdf(z) / (c.stddev * c.stddev);
  }
  return v;
}

double Distribution1D::cdf(double x) const {
  if (uniform_) return std::clamp((x - lo_) / (hi_ - lo_), 0.0, 1.0);
  double v = 0.0;
  for (const auto& c : components_) v += c.weight * normal_cdf((x - c.mean) / c.stddev);
  return v;
}

double Distribution1D::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw InvalidParameter("quantile level must lie in (0, 1)");
  if (uniform_) return lo_ + u * (hi_ - lo_);
  double lo = components_.front().mean, hi = lo;
  for (const auto& c : components_) {
    lo = std::min(lo, c.mean - 40.0 * c.stddev);
    hi = std::max(hi, c.mean + 40.0 * c.stddev);
  }
  // Safeguarded Newton: bisection keeps the bracket, Newton accelerates.
  double x = mean();
  for (int it = 0; it < 200; ++it) {
    const double f = cdf(x) - u;
    if (f > 0.0) hi = x; else lo = x;
    const double slope = pdf(x);
    double next = slope > 0.0 ? x - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

double Distribution1D::mean() const {
  if (uniform_) return 0.5 * (lo_ + hi_);
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double Distribution1D::sample(std::mt19937_64& rng) const {
  if (uniform_) return std::uniform_real_distribution<double>(lo_, hi_)(rng);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const Component* pick = &components_.back();
  for (const auto& c : components_) {
    if (u < c.weight) {
      pick = &c;
      break;
    }
    u -= c.weight;
  }
  return std::normal_distribution<double>(pick->mean, pick->stddev)(rng);
}

std::vector<double> quantile_points(const Distribution1D& dist, std::size_t count) {
  std::vector<double> pts(count);
  for (std::size_t k = 0; k < count; ++k) {
    pts[k] = dist.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(count));
  }
  return pts;
}

}  // namespace steinflow
