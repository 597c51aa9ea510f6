#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steinflow/grid.hpp"

namespace steinflow {

enum class PotentialFamily {
  quadratic,    ///< V(x) = x^T A x / 2, A symmetric positive definite
  monomial,     ///< V(x) = m |x|^p, p even >= 2, m > 0
  double_well,  ///< V(x) = a (x^2 - b^2)^2, one-dimensional
};

std::string to_string(PotentialFamily family);
PotentialFamily parse_potential_family(const std::string& name);

/// Family name plus flat coefficient list, as read from configuration:
///   quadratic:   d*d row-major entries of A, or one entry a meaning a*I
///   monomial:    m, p
///   double-well: a, b
struct PotentialSpec {
  PotentialFamily family = PotentialFamily::quadratic;
  std::size_t dimension = 1;
  std::vector<double> coefficients;
};

struct PotentialDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Confining potential V >= 0 with closed-form gradient and Hessian.
class Potential {
 public:
  static Potential quadratic(const Eigen::MatrixXd& A);
  static Potential monomial(double m, int p, std::size_t dimension);
  static Potential double_well(double a, double b);

  PotentialFamily family() const noexcept { return family_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const PotentialSpec& spec() const noexcept { return spec_; }

  /// Polynomial growth order of V at infinity (2 for quadratic, p for the
  /// monomial, 4 for the double well).
  double growth_index() const noexcept { return growth_; }
  /// q = p/(p-1): the index for which |grad V|^q <= C_V (1 + V).
  double assumption_index() const noexcept { return growth_ / (growth_ - 1.0); }
  /// Conjugate index q/(q-1), equal to the growth order.
  double conjugate_index() const noexcept { return growth_; }
  /// Smallest C with |grad V(x)|^q <= C (1 + V(x)) for all x.
  double gradient_growth_constant() const noexcept { return growth_constant_; }

  double value(std::span<const double> x) const;
  /// Writes grad V(x) into `grad` and returns V(x).
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const;
  PotentialDerivatives eval(std::span<const double> x) const;

  // d = 1 fast paths.
  double value_1d(double x) const noexcept;
  double gradient_1d(double x) const noexcept;
  double hessian_1d(double x) const noexcept;

 private:
  Potential() = default;
  void finish();

  PotentialFamily family_ = PotentialFamily::quadratic;
  std::size_t dimension_ = 1;
  PotentialSpec spec_;
  Eigen::MatrixXd A_;
  double m_ = 0.0;
  int p_ = 2;
  double a_ = 0.0;
  double b_ = 0.0;
  double growth_ = 2.0;
  double growth_constant_ = 0.0;
};

/// Throws InvalidParameter for odd or small p, non-SPD A, non-positive
/// coefficients, or a double well outside d = 1.
Potential make_potential(const PotentialSpec& spec);
PotentialDerivatives potential_eval(const Potential& V, std::span<const double> x);

/// rho_inf = exp(-V) / Z on a truncated domain.
struct TargetDensity {
  Potential potential;
  double log_normalizer = 0.0;
  /// Estimated mass of exp(-V)/Z outside the truncated domain.
  double truncation_residual = 0.0;
  /// Cell representation, present for d = 1.
  std::optional<GridDensity> grid;

  double density(std::span<const double> x) const;
  double density_1d(double x) const;
};

/// Integrates exp(-V) over [-L, L]^d (d <= 2) with the trapezoid rule on
/// `cells` intervals per axis. For d = 1 also returns the grid density,
/// normalised so that h * sum = 1. Throws TruncationError when the estimated
/// outside mass exceeds 1e-12.
TargetDensity target_density(const Potential& V, double half_width, std::size_t cells);

/// Empirical check of the growth assumptions over a ball of radius R.
struct AssumptionReport {
  double q = 0.0;
  double radius = 0.0;
  std::size_t samples = 0;
  /// sup |grad V|^q / (1 + V)
  double growth_ratio_sup = 0.0;
  /// sup (1 + |x|)(|grad V| + |hess V|) / (1 + V)
  double regularity_ratio_sup = 0.0;
  std::vector<double> shell_outer_radius;
  std::vector<double> shell_growth_sup;
  std::vector<double> shell_regularity_sup;
  bool growth_violation = false;
  bool regularity_violation = false;

  bool ok() const noexcept { return !growth_violation && !regularity_violation; }
  /// Structured text block for run logs.
  std::string to_text() const;
};

using PotentialFunction = std::function<PotentialDerivatives(std::span<const double>)>;

AssumptionReport verify_assumptions(const Potential& V, double radius, std::size_t samples);

/// Variant for user-supplied potentials. A ratio is flagged when it is
/// non-finite or still growing across the outer radius shells.
AssumptionReport verify_assumptions(const PotentialFunction& V, std::size_t dimension, double q,
                                    double radius, std::size_t samples);

}  // namespace steinflow
