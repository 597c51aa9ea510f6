#include "steinflow/kernels.hpp"

#include <algorithm>
#include <numbers>
#include <vector>

#include "steinflow/error.hpp"

namespace steinflow {

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::gaussian:
      return "gaussian";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  throw InvalidParameter("unknown kernel family '" + name + "'");
}

Kernel::Kernel(KernelFamily family, double variance, std::size_t dimension)
    : family_(family), variance_(variance), dimension_(dimension) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InvalidParameter("kernel variance must be positive and finite, got " +
                           std::to_string(variance));
  }
  if (dimension == 0) throw InvalidParameter("kernel dimension must be at least 1");
  norm_ = std::pow(2.0 * std::numbers::pi * variance, -0.5 * static_cast<double>(dimension));
  inv_var_ = 1.0 / variance;
  half_inv_var_ = 0.5 / variance;
}

double Kernel::value(std::span<const double> x) const {
  double r2 = 0.0;
  for (double xi : x) r2 += xi * xi;
  return norm_ * std::exp(-r2 * half_inv_var_);
}

double Kernel::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
  const double v = value(x);
  for (std::size_t a = 0; a < x.size(); ++a) grad[a] = -x[a] * inv_var_ * v;
  return v;
}

double Kernel::laplacian(std::span<const double> x) const {
  double r2 = 0.0;
  for (double xi : x) r2 += xi * xi;
  const double v = norm_ * std::exp(-r2 * half_inv_var_);
  return (r2 * inv_var_ - static_cast<double>(x.size())) * inv_var_ * v;
}

KernelDerivatives Kernel::eval(std::span<const double> x) const {
  const auto d = static_cast<Eigen::Index>(x.size());
  KernelDerivatives out;
  out.value = value(x);
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
  out.gradient = -inv_var_ * out.value * xv;
  out.hessian = (xv * xv.transpose() * inv_var_ - Eigen::MatrixXd::Identity(d, d)) *
                (inv_var_ * out.value);
  out.laplacian = out.hessian.trace();
  return out;
}

double Kernel::nth_derivative_1d(double x, int order) const {
  // Probabilists' Hermite polynomials in y = x / sqrt(s):
  // d^n/dx^n e^{-y^2/2} = (-1)^n s^{-n/2} He_n(y) e^{-y^2/2}.
  const double y = x / std::sqrt(variance_);
  const double k = value_1d(x);
  switch (order) {
    case 0:
      return k;
    case 1:
      return -y * k / std::sqrt(variance_);
    case 2:
      return (y * y - 1.0) * k * inv_var_;
    case 3:
      return -(y * y * y - 3.0 * y) * k * inv_var_ / std::sqrt(variance_);
    case 4:
      return (y * y * y * y - 6.0 * y * y + 3.0) * k * inv_var_ * inv_var_;
    default:
      throw InvalidParameter("kernel derivatives are available up to order 4");
  }
}

double Kernel::sup_norm(int order) const {
  switch (order) {
    case 0:
      return norm_;
    case 1:
      return norm_ * std::exp(-0.5) / std::sqrt(variance_);
    case 2:
      // Hessian eigenvalues are (r^2/s - 1)/s along x and -1/s across; the
      // largest magnitude is attained at the origin.
      return norm_ * inv_var_;
    case 3:
    case 4: {
      // Radial profile maximum, sampled densely over |y| <= 6 where the
      // Hermite envelope peaks.
      double best = 0.0;
      const double sd = std::sqrt(variance_);
      for (int i = 0; i <= 120000; ++i) {
        const double x = sd * (-6.0 + 12.0 * i / 120000.0);
        best = std::max(best, std::abs(nth_derivative_1d(x, order)));
      }
      return best;
    }
    default:
      throw InvalidParameter("sup_norm is available for orders 0..4");
  }
}

Kernel make_gaussian_kernel(double variance, std::size_t dimension) {
  return Kernel(KernelFamily::gaussian, variance, dimension);
}

KernelDerivatives kernel_eval(const Kernel& k, std::span<const double> x) { return k.eval(x); }

Kernel half_factor(const Kernel& k) {
  switch (k.family()) {
    case KernelFamily::gaussian:
      return Kernel(KernelFamily::gaussian, 0.5 * k.variance(), k.dimension());
  }
  throw NotFactorizable("kernel family '" + to_string(k.family()) +
                        "' has no known convolution square root");
}

Eigen::MatrixXd gram_matrix(const Kernel& k, std::span<const double> points) {
  const std::size_t d = k.dimension();
  if (points.empty() || points.size() % d != 0) {
    throw InvalidInput("gram_matrix: point buffer is not a non-empty multiple of the dimension");
  }
  const std::size_t m = points.size() / d;
  Eigen::MatrixXd G(m, m);
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < m; ++i) {
    G(i, i) = k.peak();
    for (std::size_t j = i + 1; j < m; ++j) {
      for (std::size_t a = 0; a < d; ++a) diff[a] = points[i * d + a] - points[j * d + a];
      G(i, j) = G(j, i) = k.value(diff);
    }
  }
  return G;
}

bool psd_check(const Eigen::MatrixXd& G, double tol) {
  if (G.rows() != G.cols()) throw InvalidInput("psd_check: matrix is not square");
  if (!(tol >= 0.0)) throw InvalidParameter("psd_check: tolerance must be nonnegative");
  if (G.size() == 0) return true;
  const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw InvalidInput("psd_check: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(G, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  const double radius = ev.cwiseAbs().maxCoeff();
  return ev.minCoeff() >= -tol * radius;
}

}  // namespace steinflow
