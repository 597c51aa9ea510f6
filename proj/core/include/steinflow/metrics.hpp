#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "steinflow/grid.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/potentials.hpp"

namespace steinflow {

/// Weighted point cloud sum_i w_i delta_{x_i}; points stored row-major (n x d).
/// Empty `weights` means uniform weights 1/n.
struct EmpiricalMeasure {
  std::size_t dimension = 1;
  std::vector<double> points;
  std::vector<double> weights;

  static EmpiricalMeasure uniform(std::vector<double> points, std::size_t dimension = 1);

  std::size_t size() const noexcept { return dimension == 0 ? 0 : points.size() / dimension; }
  bool is_uniform() const noexcept { return weights.empty(); }
  double weight(std::size_t i) const noexcept {
    return weights.empty() ? 1.0 / static_cast<double>(size()) : weights[i];
  }
  std::span<const double> point(std::size_t i) const noexcept {
    return {points.data() + i * dimension, dimension};
  }
  /// Throws InvalidInput if the layout is inconsistent or the weights are not
  /// positive with unit sum (within 1e-12).
  void validate() const;
};

enum class MomentNorm {
  pv,  ///< \int (1 + V) d mu
  pp,  ///< \int |x|^p d mu
};

/// p-Wasserstein distance between one-dimensional measures, computed from the
/// quantile functions. Both quantile functions are piecewise linear (atoms
/// give flat pieces, grid cells give linear pieces), so W_p^p is integrated in
/// closed form on their common refinement; the result is exact up to rounding.
/// Equal-size uniform empirical measures reduce to the sorted pairing.
/// Inputs are rescaled to unit mass. Throws InvalidInput for d != 1.
double wasserstein_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p = 1.0);
double wasserstein_1d(const GridDensity& a, const GridDensity& b, double p = 1.0);
double wasserstein_1d(const EmpiricalMeasure& a, const GridDensity& b, double p = 1.0);
double wasserstein_1d(const GridDensity& a, const EmpiricalMeasure& b, double p = 1.0);

/// Brute-force optimal assignment over all n! permutations; any dimension,
/// equal sizes n <= 8, uniform weights. Throws InvalidInput otherwise.
double wasserstein_exact_small(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p = 1.0);

/// KL(rho || rho_inf) by the cell rule, with 0 log 0 = 0. The target must carry
/// a grid identical to rho's.
double kl_grid(const GridDensity& rho, const TargetDensity& target);

/// Stein kernel for rho_inf = e^{-V}/Z:
///   u(x, y) = gradV(x).gradV(y) K(x-y) + (gradV(x) - gradV(y)).gradK(x-y) - lap K(x-y).
double stein_kernel(std::span<const double> x, std::span<const double> y, const Kernel& k,
                    const Potential& V);

/// Squared kernelized Stein discrepancy sum_ij w_i w_j u(x_i, x_j). For the
/// quadrature ensemble of a smooth density rho this is the KL dissipation
/// \int\int (grad rho + grad V rho)(x) K(x-y) (grad rho + grad V rho)(y).
double ksd(const EmpiricalMeasure& mu, const Kernel& k, const Potential& V);

double moment_norm(const EmpiricalMeasure& mu, const Potential& V, MomentNorm mode, double p = 2.0);
double moment_norm(const GridDensity& rho, const Potential& V, MomentNorm mode, double p = 2.0);

}  // namespace steinflow
