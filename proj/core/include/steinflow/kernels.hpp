#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace steinflow {

enum class KernelFamily { gaussian };

std::string to_string(KernelFamily family);
KernelFamily parse_kernel_family(const std::string& name);

/// Value, gradient, Hessian and Laplacian of a kernel at one point.
struct KernelDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  double laplacian = 0.0;
};

/// Translation-invariant interaction kernel K(x - y).
///
/// The Gaussian family is the normalized heat kernel
///   K(x) = (2 pi s)^{-d/2} exp(-|x|^2 / (2 s)),
/// which is symmetric, positive definite, smooth with bounded derivatives of
/// every order, and has the strictly positive Fourier transform
/// exp(-s |xi|^2 / 2). Variance s = 2 gives (4 pi)^{-d/2} exp(-|x|^2 / 4).
class Kernel {
 public:
  Kernel(KernelFamily family, double variance, std::size_t dimension);

  KernelFamily family() const noexcept { return family_; }
  double variance() const noexcept { return variance_; }
  std::size_t dimension() const noexcept { return dimension_; }
  /// K(0).
  double peak() const noexcept { return norm_; }

  double value(std::span<const double> x) const;
  /// Writes the gradient into `grad` and returns the value.
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const;
  double laplacian(std::span<const double> x) const;
  KernelDerivatives eval(std::span<const double> x) const;

  // One-dimensional profile; valid for any dimension as the restriction of K
  // to a coordinate axis, and equal to K itself when d = 1.
  double value_1d(double x) const noexcept { return norm_ * std::exp(-x * x * half_inv_var_); }
  double derivative_1d(double x) const noexcept { return -x * inv_var_ * value_1d(x); }
  double second_derivative_1d(double x) const noexcept {
    return (x * x * inv_var_ - 1.0) * inv_var_ * value_1d(x);
  }
  /// Derivative of order 0..4 of the one-dimensional profile.
  double nth_derivative_1d(double x, int order) const;

  /// Fourier transform  K^(xi) = \int K(x) e^{-i xi.x} dx  at |xi| = xi_norm.
  double fourier(double xi_norm) const noexcept {
    return std::exp(-0.5 * variance_ * xi_norm * xi_norm);
  }

  /// sup_x |D^order K(x)| (operator norm for the Hessian), order 0..4.
  double sup_norm(int order) const;

 private:
  KernelFamily family_;
  double variance_;
  std::size_t dimension_;
  double norm_;
  double inv_var_;
  double half_inv_var_;
};

/// Gaussian kernel of variance s in dimension d. Throws InvalidParameter for
/// s <= 0 (or non-finite) and d == 0.
Kernel make_gaussian_kernel(double variance, std::size_t dimension);

KernelDerivatives kernel_eval(const Kernel& k, std::span<const double> x);

/// Convolution square root K_{1/2} with K = K_{1/2} * K_{1/2}. For the
/// Gaussian family this is the Gaussian of half the variance.
Kernel half_factor(const Kernel& k);

/// Gram matrix G_ij = K(x_i - x_j) for m points stored row-major (m x d) in
/// `points`.
Eigen::MatrixXd gram_matrix(const Kernel& k, std::span<const double> points);

/// True iff the smallest eigenvalue of the symmetric matrix G is at least
/// -tol * (largest eigenvalue magnitude). Throws InvalidInput when G is not
/// symmetric within tol (relative to its largest entry).
bool psd_check(const Eigen::MatrixXd& G, double tol = 1e-10);

}  // namespace steinflow
