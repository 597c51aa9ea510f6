#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "steinflow/error.hpp"
#include "steinflow/kernels.hpp"

using namespace steinflow;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Independent closed form: (2 pi s)^{-d/2} exp(-|x|^2 / 2s).
double gaussian(double s, std::span<const double> x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::pow(2.0 * std::numbers::pi * s, -0.5 * static_cast<double>(x.size())) * std::exp(-r2 / (2.0 * s));
}

}  // namespace

TEST_CASE("kernel values at the origin") {
  const Kernel k2(KernelFamily::gaussian, 2.0, 1);
  const double zero[1] = {0.0};
  CHECK(k2.value(zero) == doctest::Approx(0.2820948).epsilon(1e-7));
  CHECK(k2.value(zero) == doctest::Approx(1.0 / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-15));
  const Kernel k1(KernelFamily::gaussian, 1.0, 1);
  CHECK(k1.value(zero) == doctest::Approx(0.3989423).epsilon(1e-7));

  const auto e = kernel_eval(k2, zero);
  CHECK(e.gradient[0] == 0.0);
  CHECK(e.laplacian == doctest::Approx(-0.1410474).epsilon(1e-7));

  const Kernel kd2(KernelFamily::gaussian, 2.0, 2);
  const double zero2[2] = {0.0, 0.0};
  CHECK(kd2.laplacian(zero2) == doctest::Approx(-kd2.value(zero2)).epsilon(1e-14));
}

TEST_CASE("kernel matches an independent closed form and is even") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 2.0);
  for (std::size_t d = 1; d <= 3; ++d) {
    const Kernel k(KernelFamily::gaussian, 1.7, d);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> x(d), mx(d);
      for (std::size_t a = 0; a < d; ++a) mx[a] = -(x[a] = z(rng));
      CHECK(rel_err(k.value(x), gaussian(1.7, x)) < 1e-14);
      const auto p = kernel_eval(k, x), m = kernel_eval(k, mx);
      CHECK(p.value == m.value);
      for (std::size_t a = 0; a < d; ++a) CHECK(p.gradient[a] == -m.gradient[a]);
    }
  }
}

TEST_CASE("gradient and hessian agree with central differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.5);
  const double h = 1e-4;
  for (std::size_t d = 1; d <= 3; ++d) {
    const Kernel k(KernelFamily::gaussian, 2.0, d);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> x(d);
      for (auto& v : x) v = z(rng);
      const auto e = kernel_eval(k, x);
      const double scale_g = std::max(e.gradient.cwiseAbs().maxCoeff(), k.sup_norm(1));
      const double scale_h = std::max(e.hessian.cwiseAbs().maxCoeff(), k.sup_norm(2));
      double lap = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        auto xp = x, xm = x;
        xp[a] += h;
        xm[a] -= h;
        const double fd = (k.value(xp) - k.value(xm)) / (2.0 * h);
        CHECK(std::abs(fd - e.gradient[static_cast<Eigen::Index>(a)]) < 1e-6 * scale_g);
        const auto gp = kernel_eval(k, xp).gradient, gm = kernel_eval(k, xm).gradient;
        for (std::size_t b = 0; b < d; ++b) {
          const double fdh = (gp[static_cast<Eigen::Index>(b)] - gm[static_cast<Eigen::Index>(b)]) / (2.0 * h);
          CHECK(std::abs(fdh - e.hessian(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a))) < 1e-6 * scale_h);
        }
        lap += e.hessian(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
      }
      CHECK(std::abs(lap - e.laplacian) < 1e-14);
    }
  }
}

TEST_CASE("one-dimensional derivatives up to order four") {
  const Kernel k(KernelFamily::gaussian, 2.0, 1);
  const double h = 1e-4;
  for (double x = -6.0; x <= 6.0; x += 0.37) {
    CHECK(k.nth_derivative_1d(x, 0) == doctest::Approx(k.value_1d(x)).epsilon(1e-14));
    CHECK(k.nth_derivative_1d(x, 1) == doctest::Approx(k.derivative_1d(x)).epsilon(1e-13));
    CHECK(k.nth_derivative_1d(x, 2) == doctest::Approx(k.second_derivative_1d(x)).epsilon(1e-13));
    for (int n = 3; n <= 4; ++n) {
      const double fd = (k.nth_derivative_1d(x + h, n - 1) - k.nth_derivative_1d(x - h, n - 1)) / (2.0 * h);
      CHECK(std::abs(fd - k.nth_derivative_1d(x, n)) < 1e-6 * k.sup_norm(n));
    }
  }
}

TEST_CASE("sup norms match dense sampling") {
  for (double s : {0.5, 2.0, 7.0}) {
    const Kernel k(KernelFamily::gaussian, s, 1);
    for (int n = 0; n <= 4; ++n) {
      double best = 0.0;
      for (int i = -200000; i <= 200000; ++i) best = std::max(best, std::abs(k.nth_derivative_1d(i * 1e-4 * std::sqrt(s), n)));
      CHECK(k.sup_norm(n) == doctest::Approx(best).epsilon(1e-6));
    }
    CHECK(k.sup_norm(1) == doctest::Approx(k.peak() * std::exp(-0.5) / std::sqrt(s)).epsilon(1e-14));
  }
}

TEST_CASE("fourier transform matches quadrature") {
  const Kernel k(KernelFamily::gaussian, 2.0, 1);
  for (double xi : {0.0, 0.3, 1.0, 2.5}) {
    double sum = 0.0;
    const double h = 1e-3;
    for (int i = -30000; i <= 30000; ++i) sum += k.value_1d(i * h) * std::cos(xi * i * h);
    CHECK(std::abs(sum * h - k.fourier(xi)) < 1e-12);
  }
}

TEST_CASE("half factor") {
  const Kernel k(KernelFamily::gaussian, 2.0, 1);
  const Kernel half = half_factor(k);
  CHECK(half.variance() == 1.0);
  CHECK(half.dimension() == 1);

  for (double xi = 0.0; xi <= 10.0; xi += 0.01) {
    CHECK(std::abs(half.fourier(xi) * half.fourier(xi) - k.fourier(xi)) < 1e-10);
  }

  // Trapezoid self-convolution on [-20, 20] with spacing 1e-2.
  const double h = 1e-2;
  const int n = 2000;
  double worst = 0.0;
  for (double x = -10.0; x <= 10.0; x += 0.25) {
    double sum = 0.0;
    for (int i = -n; i <= n; ++i) {
      const double w = (i == -n || i == n) ? 0.5 : 1.0;
      sum += w * half.value_1d(x - i * h) * half.value_1d(i * h);
    }
    worst = std::max(worst, std::abs(sum * h - k.value_1d(x)));
    if (x == 0.0) CHECK(sum * h == doctest::Approx(0.2820948).epsilon(1e-6));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gram matrix") {
  const Kernel k(KernelFamily::gaussian, 2.0, 1);
  const double one[1] = {0.3};
  const auto g1 = gram_matrix(k, one);
  CHECK(g1.rows() == 1);
  CHECK(g1(0, 0) == doctest::Approx(k.peak()));

  const double twin[2] = {1.0, 1.0};
  const auto g2 = gram_matrix(k, twin);
  CHECK((g2.array() == k.peak()).all());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g2);
  CHECK(std::abs(es.eigenvalues()[0]) < 1e-15);
  CHECK(es.eigenvalues()[1] == doctest::Approx(0.5641896).epsilon(1e-7));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> pts(50);
  for (auto& p : pts) p = u(rng);
  Eigen::MatrixXd g = gram_matrix(k, pts);
  CHECK(g.isApprox(g.transpose(), 0.0));
  g.diagonal().array() += 1e-12;
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("psd_check") {
  CHECK(psd_check(Eigen::MatrixXd::Identity(4, 4)));
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_FALSE(psd_check(bad));
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.0, 1;
  CHECK_THROWS_AS(psd_check(asym), InvalidInput);

  std::mt19937_64 rng(17);
  for (std::size_t d = 1; d <= 3; ++d) {
    const Kernel k(KernelFamily::gaussian, 2.0, d);
    for (int t = 0; t < 20; ++t) {
      const std::size_t m = 1 + rng() % 64;
      std::normal_distribution<double> z(0.0, 2.0);
      std::vector<double> pts(m * d);
      for (auto& p : pts) p = z(rng);
      CHECK(psd_check(gram_matrix(k, pts)));
    }
  }
}

TEST_CASE("invalid kernels are rejected") {
  CHECK_THROWS_AS(Kernel(KernelFamily::gaussian, 0.0, 1), InvalidParameter);
  CHECK_THROWS_AS(Kernel(KernelFamily::gaussian, -1.0, 1), InvalidParameter);
  CHECK_THROWS_AS(Kernel(KernelFamily::gaussian, std::nan(""), 1), InvalidParameter);
  CHECK_THROWS_AS(Kernel(KernelFamily::gaussian, 1.0, 0), InvalidParameter);
  CHECK_THROWS_AS(parse_kernel_family("laplace"), InvalidParameter);
  CHECK(parse_kernel_family("gaussian") == KernelFamily::gaussian);
}
