#include "steinflow/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "steinflow/error.hpp"

namespace steinflow {
namespace {

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

double squared_norm(std::span<const double> x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return r2;
}

constexpr double kTruncationThreshold = 1e-12;

}  // namespace

std::string to_string(PotentialFamily family) {
  switch (family) {
    case PotentialFamily::quadratic:
      return "quadratic";
    case PotentialFamily::monomial:
      return "monomial";
    case PotentialFamily::double_well:
      return "double-well";
  }
  return "unknown";
}

PotentialFamily parse_potential_family(const std::string& name) {
  if (name == "quadratic") return PotentialFamily::quadratic;
  if (name == "monomial") return PotentialFamily::monomial;
  if (name == "double-well" || name == "double_well") return PotentialFamily::double_well;
  throw InvalidParameter("unknown potential family '" + name + "'");
}

Potential Potential::quadratic(const Eigen::MatrixXd& A) {
  if (A.rows() == 0 || A.rows() != A.cols()) throw InvalidParameter("quadratic potential needs a square matrix");
  if (!A.allFinite() || (A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * A.cwiseAbs().maxCoeff()) {
    throw InvalidParameter("quadratic potential matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) throw InvalidParameter("quadratic potential matrix must be positive definite");

  Potential V;
  V.family_ = PotentialFamily::quadratic;
  V.dimension_ = static_cast<std::size_t>(A.rows());
  V.A_ = A;
  V.growth_ = 2.0;
  // |Ax|^2 <= lmax^2 |x|^2 <= (2 lmax^2 / lmin) V(x).
  V.growth_constant_ = 2.0 * lmax * lmax / lmin;
  V.spec_.family = V.family_;
  V.spec_.dimension = V.dimension_;
  V.spec_.coefficients.assign(A.data(), A.data() + A.size());
  return V;
}

Potential Potential::monomial(double m, int p, std::size_t dimension) {
  if (!(m > 0.0) || !std::isfinite(m)) throw InvalidParameter("monomial coefficient m must be positive");
  if (p < 2 || p % 2 != 0) throw InvalidParameter("monomial exponent p must be an even integer >= 2");
  if (dimension == 0) throw InvalidParameter("potential dimension must be at least 1");
  Potential V;
  V.family_ = PotentialFamily::monomial;
  V.dimension_ = dimension;
  V.m_ = m;
  V.p_ = p;
  V.growth_ = p;
  // |grad V|^q = (m p)^q |x|^p = ((m p)^q / m) V.
  V.growth_constant_ = std::pow(m * p, V.assumption_index()) / m;
  V.spec_ = {V.family_, dimension, {m, static_cast<double>(p)}};
  return V;
}

Potential Potential::double_well(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw InvalidParameter("double-well coefficients a and b must be positive");
  }
  Potential V;
  V.family_ = PotentialFamily::double_well;
  V.dimension_ = 1;
  V.a_ = a;
  V.b_ = b;
  V.growth_ = 4.0;
  V.spec_ = {V.family_, 1, {a, b}};
  const double q = V.assumption_index();
  double sup = std::pow(4.0 * a, q) / a;  // limit of the ratio at infinity
  const double R = 20.0 * (b + 1.0);
  for (int i = 0; i <= 400000; ++i) {
    const double x = -R + 2.0 * R * i / 400000.0;
    sup = std::max(sup, std::pow(std::abs(V.gradient_1d(x)), q) / (1.0 + V.value_1d(x)));
  }
  V.growth_constant_ = sup;
  return V;
}

double Potential::value(std::span<const double> x) const {
  switch (family_) {
    case PotentialFamily::quadratic: {
      Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
      return 0.5 * xv.dot(A_ * xv);
    }
    case PotentialFamily::monomial:
      return m_ * ipow(squared_norm(x), p_ / 2);
    case PotentialFamily::double_well:
      return value_1d(x[0]);
  }
  return 0.0;
}

double Potential::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
  switch (family_) {
    case PotentialFamily::quadratic: {
      const auto d = static_cast<Eigen::Index>(x.size());
      Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
      Eigen::Map<Eigen::VectorXd> g(grad.data(), d);
      g.noalias() = A_ * xv;
      return 0.5 * xv.dot(g);
    }
    case PotentialFamily::monomial: {
      const double r2 = squared_norm(x);
      const double scale = m_ * p_ * ipow(r2, p_ / 2 - 1);
      for (std::size_t a = 0; a < x.size(); ++a) grad[a] = scale * x[a];
      return m_ * ipow(r2, p_ / 2);
    }
    case PotentialFamily::double_well:
      grad[0] = gradient_1d(x[0]);
      return value_1d(x[0]);
  }
  return 0.0;
}

PotentialDerivatives Potential::eval(std::span<const double> x) const {
  const auto d = static_cast<Eigen::Index>(x.size());
  PotentialDerivatives out;
  out.gradient.resize(d);
  out.value = value_and_gradient(x, {out.gradient.data(), x.size()});
  switch (family_) {
    case PotentialFamily::quadratic:
      out.hessian = A_;
      break;
    case PotentialFamily::monomial: {
      // m p |x|^{p-2} I + m p (p-2) |x|^{p-4} x x^T
      const double r2 = squared_norm(x);
      Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
      out.hessian = m_ * p_ * ipow(r2, p_ / 2 - 1) * Eigen::MatrixXd::Identity(d, d);
      if (p_ >= 4) out.hessian += m_ * p_ * (p_ - 2) * ipow(r2, p_ / 2 - 2) * (xv * xv.transpose());
      break;
    }
    case PotentialFamily::double_well:
      out.hessian = Eigen::MatrixXd::Constant(1, 1, hessian_1d(x[0]));
      break;
  }
  return out;
}

double Potential::value_1d(double x) const noexcept {
  switch (family_) {
    case PotentialFamily::quadratic:
      return 0.5 * A_(0, 0) * x * x;
    case PotentialFamily::monomial:
      return m_ * ipow(x * x, p_ / 2);
    case PotentialFamily::double_well: {
      const double w = x * x - b_ * b_;
      return a_ * w * w;
    }
  }
  return 0.0;
}

double Potential::gradient_1d(double x) const noexcept {
  switch (family_) {
    case PotentialFamily::quadratic:
      return A_(0, 0) * x;
    case PotentialFamily::monomial:
      return m_ * p_ * ipow(x * x, p_ / 2 - 1) * x;
    case PotentialFamily::double_well:
      return 4.0 * a_ * x * (x * x - b_ * b_);
  }
  return 0.0;
}

double Potential::hessian_1d(double x) const noexcept {
  switch (family_) {
    case PotentialFamily::quadratic:
      return A_(0, 0);
    case PotentialFamily::monomial:
      return m_ * p_ * (p_ - 1) * ipow(x * x, p_ / 2 - 1);
    case PotentialFamily::double_well:
      return a_ * (12.0 * x * x - 4.0 * b_ * b_);
  }
  return 0.0;
}

Potential make_potential(const PotentialSpec& spec) {
  const auto& c = spec.coefficients;
  switch (spec.family) {
    case PotentialFamily::quadratic: {
      const auto d = static_cast<Eigen::Index>(spec.dimension);
      if (d == 0) throw InvalidParameter("potential dimension must be at least 1");
      if (c.size() == 1) {
        if (!(c[0] > 0.0)) throw InvalidParameter("quadratic scale must be positive");
        return Potential::quadratic(c[0] * Eigen::MatrixXd::Identity(d, d));
      }
      if (c.size() != static_cast<std::size_t>(d * d)) {
        throw InvalidParameter("quadratic potential takes 1 or d*d coefficients");
      }
      Eigen::MatrixXd A(d, d);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) A(i, j) = c[static_cast<std::size_t>(i * d + j)];
      return Potential::quadratic(A);
    }
    case PotentialFamily::monomial: {
      if (c.size() != 2) throw InvalidParameter("monomial potential takes coefficients m, p");
      if (c[1] != std::round(c[1])) throw InvalidParameter("monomial exponent must be an integer");
      return Potential::monomial(c[0], static_cast<int>(c[1]), spec.dimension);
    }
    case PotentialFamily::double_well: {
      if (spec.dimension != 1) throw InvalidParameter("double-well potential is one-dimensional");
      if (c.size() != 2) throw InvalidParameter("double-well potential takes coefficients a, b");
      return Potential::double_well(c[0], c[1]);
    }
  }
  throw InvalidParameter("unknown potential family");
}

PotentialDerivatives potential_eval(const Potential& V, std::span<const double> x) { return V.eval(x); }

double TargetDensity::density(std::span<const double> x) const {
  return std::exp(-potential.value(x) - log_normalizer);
}

double TargetDensity::density_1d(double x) const {
  return std::exp(-potential.value_1d(x) - log_normalizer);
}

TargetDensity target_density(const Potential& V, double half_width, std::size_t cells) {
  const std::size_t d = V.dimension();
  if (d > 2) throw InvalidParameter("target_density supports d <= 2");
  if (!(half_width > 0.0) || cells < 2) throw InvalidParameter("target_density needs L > 0 and >= 2 cells");
  const double h = 2.0 * half_width / static_cast<double>(cells);

  // Trapezoid rule on the cell edges, shifted by the minimum for stability.
  std::vector<double> nodes(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) nodes[i] = -half_width + static_cast<double>(i) * h;
  auto trap_weight = [&](std::size_t i) { return (i == 0 || i == cells) ? 0.5 * h : h; };

  double vmin = std::numeric_limits<double>::infinity();
  double boundary_vmin = std::numeric_limits<double>::infinity();
  std::vector<double> vals;
  if (d == 1) {
    vals.resize(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) vals[i] = V.value_1d(nodes[i]);
    for (double v : vals) vmin = std::min(vmin, v);
    boundary_vmin = std::min(vals.front(), vals.back());
  } else {
    vals.resize((cells + 1) * (cells + 1));
    for (std::size_t i = 0; i <= cells; ++i) {
      for (std::size_t j = 0; j <= cells; ++j) {
        const double x[2] = {nodes[i], nodes[j]};
        const double v = V.value(x);
        vals[i * (cells + 1) + j] = v;
        vmin = std::min(vmin, v);
        if (i == 0 || j == 0 || i == cells || j == cells) boundary_vmin = std::min(boundary_vmin, v);
      }
    }
  }

  double sum = 0.0;
  if (d == 1) {
    for (std::size_t i = 0; i <= cells; ++i) sum += trap_weight(i) * std::exp(-(vals[i] - vmin));
  } else {
    for (std::size_t i = 0; i <= cells; ++i)
      for (std::size_t j = 0; j <= cells; ++j)
        sum += trap_weight(i) * trap_weight(j) * std::exp(-(vals[i * (cells + 1) + j] - vmin));
  }

  TargetDensity target{V, std::log(sum) - vmin, 0.0, std::nullopt};

  // Outside mass per unit boundary is bounded by rho(L) / |grad V(L)| once V
  // is convex beyond L (Mills-ratio bound); the factor 2 d counts faces.
  const double boundary_density = std::exp(-boundary_vmin - target.log_normalizer);
  double slope = 1.0;
  if (d == 1) {
    slope = std::max(1.0, std::min(std::abs(V.gradient_1d(half_width)), std::abs(V.gradient_1d(-half_width))));
  }
  const double face = d == 1 ? 1.0 : 2.0 * half_width;
  target.truncation_residual = 2.0 * static_cast<double>(d) * face * boundary_density / slope;
  if (target.truncation_residual > kTruncationThreshold) {
    std::ostringstream msg;
    msg << "domain [-" << half_width << ", " << half_width << "] truncates an estimated mass "
        << target.truncation_residual << " of exp(-V)/Z (threshold " << kTruncationThreshold << ")";
    throw TruncationError(msg.str(), boundary_density);
  }

  if (d == 1) {
    target.grid = sample_density(half_width, cells, [&](double x) { return std::exp(-(V.value_1d(x) - vmin)); });
  }
  return target;
}

std::string AssumptionReport::to_text() const {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "[assumptions]\n"
      << "q = " << q << "\n"
      << "radius = " << radius << "\n"
      << "samples = " << samples << "\n"
      << "growth_ratio_sup = " << growth_ratio_sup << "\n"
      << "regularity_ratio_sup = " << regularity_ratio_sup << "\n"
      << "growth_violation = " << (growth_violation ? "true" : "false") << "\n"
      << "regularity_violation = " << (regularity_violation ? "true" : "false") << "\n"
      << "shells (outer_radius, growth_sup, regularity_sup):\n";
  for (std::size_t i = 0; i < shell_outer_radius.size(); ++i) {
    out << "  " << shell_outer_radius[i] << ", " << shell_growth_sup[i] << ", "
        << shell_regularity_sup[i] << "\n";
  }
  return out.str();
}

namespace {

constexpr std::size_t kShells = 16;
// A ratio that still grows by more than this factor across the outer quarter
// of the sampled radius is treated as unbounded.
constexpr double kShellGrowthFactor = 1.1;

bool grows(const std::vector<double>& shell_sup) {
  for (double v : shell_sup) {
    if (!std::isfinite(v)) return true;
  }
  const double outer = shell_sup[kShells - 1];
  const double inner = shell_sup[kShells - 1 - kShells / 4];
  return inner > 0.0 && outer > kShellGrowthFactor * inner;
}

}  // namespace

AssumptionReport verify_assumptions(const PotentialFunction& V, std::size_t dimension, double q,
                                    double radius, std::size_t samples) {
  if (!(radius > 0.0) || samples < kShells) {
    throw InvalidParameter("verify_assumptions needs a positive radius and at least 16 samples");
  }
  AssumptionReport report;
  report.q = q;
  report.radius = radius;
  report.samples = samples;
  report.shell_outer_radius.resize(kShells);
  report.shell_growth_sup.assign(kShells, 0.0);
  report.shell_regularity_sup.assign(kShells, 0.0);
  for (std::size_t s = 0; s < kShells; ++s) {
    report.shell_outer_radius[s] = radius * static_cast<double>(s + 1) / kShells;
  }

  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  std::vector<double> x(dimension);
  for (std::size_t i = 0; i < samples; ++i) {
    // Radii are stratified so every shell is populated; directions are
    // deterministic-random for d > 1 and alternate sign for d = 1.
    const double r = radius * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
    if (dimension == 1) {
      x[0] = (i % 2 == 0) ? r : -r;
    } else {
      double n2 = 0.0;
      for (auto& v : x) {
        v = normal(rng);
        n2 += v * v;
      }
      for (auto& v : x) v *= r / std::sqrt(n2);
    }
    const PotentialDerivatives pd = V(x);
    const double vx = pd.value;
    const double g = pd.gradient.norm();
    double hnorm = 0.0;
    if (pd.hessian.size() == 1) {
      hnorm = std::abs(pd.hessian(0, 0));
    } else if (pd.hessian.allFinite()) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pd.hessian, Eigen::EigenvaluesOnly);
      hnorm = eig.eigenvalues().cwiseAbs().maxCoeff();
    } else {
      hnorm = std::numeric_limits<double>::infinity();
    }
    double growth = std::pow(g, q) / (1.0 + vx);
    double regularity = (1.0 + r) * (g + hnorm) / (1.0 + vx);
    if (std::isnan(growth)) growth = std::numeric_limits<double>::infinity();
    if (std::isnan(regularity)) regularity = std::numeric_limits<double>::infinity();

    const std::size_t shell = std::min(kShells - 1, static_cast<std::size_t>(r / radius * kShells));
    report.shell_growth_sup[shell] = std::max(report.shell_growth_sup[shell], growth);
    report.shell_regularity_sup[shell] = std::max(report.shell_regularity_sup[shell], regularity);
    report.growth_ratio_sup = std::max(report.growth_ratio_sup, growth);
    report.regularity_ratio_sup = std::max(report.regularity_ratio_sup, regularity);
  }
  report.growth_violation = grows(report.shell_growth_sup);
  report.regularity_violation = grows(report.shell_regularity_sup);
  return report;
}

AssumptionReport verify_assumptions(const Potential& V, double radius, std::size_t samples) {
  return verify_assumptions([&V](std::span<const double> x) { return V.eval(x); }, V.dimension(),
                            V.assumption_index(), radius, samples);
}

}  // namespace steinflow
