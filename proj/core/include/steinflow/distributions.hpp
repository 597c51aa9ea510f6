#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace steinflow {

/// One-dimensional initial law: a finite normal mixture or a uniform law.
/// A single normal is a one-component mixture.
class Distribution1D {
 public:
  struct Component {
    double weight;
    double mean;
    double stddev;
  };

  static Distribution1D normal(double mean, double stddev);
  static Distribution1D uniform(double lo, double hi);
  static Distribution1D mixture(std::vector<Component> components);

  /// Builds from a family name and a flat parameter list:
  ///   normal: mean, std   uniform: lo, hi   mixture: (w, mean, std) repeated.
  static Distribution1D from_parameters(const std::string& family,
                                        const std::vector<double>& parameters);

  double pdf(double x) const;
  double pdf_derivative(double x) const;
  double cdf(double x) const;
  /// Inverse distribution function on (0, 1), accurate to ~1e-14 absolute.
  double quantile(double u) const;
  double mean() const;
  double sample(std::mt19937_64& rng) const;

  bool is_uniform() const noexcept { return uniform_; }
  const std::vector<Component>& components() const noexcept { return components_; }

 private:
  Distribution1D() = default;

  bool uniform_ = false;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<Component> components_;
};

/// Equal-mass stratification: the M points F^{-1}((k + 1/2) / M).
std::vector<double> quantile_points(const Distribution1D& dist, std::size_t count);

}  // namespace steinflow
