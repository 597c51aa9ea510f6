// Acceptance suite: `acceptance N` checks criterion N (1-12) and prints one
// PASS/FAIL line. Exit status 0 on PASS, 1 on FAIL, 2 on bad usage.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "steinflow/error.hpp"
#include "steinflow/experiments.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/meanfield.hpp"
#include "steinflow/metrics.hpp"
#include "steinflow/particles.hpp"
#include "steinflow/potentials.hpp"

using namespace steinflow;

namespace {

// Tolerances, one per criterion.
constexpr double kPsdTol = 1e-10;            // 1
constexpr double kKsdRelTol = 0.03;          // 2
constexpr double kInvarianceW1 = 5e-3;       // 3
constexpr double kKlStepIncrease = 1e-8;     // 4
constexpr double kDissipationRelTol = 0.03;  // 4
constexpr double kMeanFieldFinal = 5e-3;     // 5
constexpr double kStabilitySpread = 3.0;     // 6
constexpr double kUniformSlack = 1e-6;       // 7
constexpr double kLongtimeW1 = 1e-2;         // 8
constexpr double kLongtimeResidual = 1e-4;   // 8
constexpr double kCrosscheckW1 = 5e-3;       // 9
constexpr double kMvFactor = 5.0;            // 10
constexpr double kWassersteinRel = 1e-12;    // 11
constexpr double kKlClosedForm = 2e-3;       // 11
constexpr double kFiniteDiffRel = 1e-6;      // 12

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const Kernel& k2() {
  static const Kernel k(KernelFamily::gaussian, 2.0, 1);
  return k;
}

const Potential& quad() {
  static const Potential V = Potential::quadratic(Eigen::MatrixXd::Identity(1, 1));
  return V;
}

bool criterion_ok(const Report& r, const std::string& name) {
  for (const auto& c : r.criteria) {
    if (c.name == name) return c.pass;
  }
  return false;
}

std::string criterion_detail(const Report& r, const std::string& name) {
  for (const auto& c : r.criteria) {
    if (c.name == name) return c.detail;
  }
  return "missing";
}

Outcome kernel_psd() {
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<std::size_t> size(1, 64);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::normal_distribution<double> tight(0.0, 0.05);
  std::size_t passed = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> pts(size(rng));
    // Every third matrix is a near-coincident cluster, the badly conditioned case.
    for (auto& p : pts) p = (t % 3 == 2) ? tight(rng) : u(rng);
    if (psd_check(gram_matrix(k2(), pts), kPsdTol)) ++passed;
  }
  return {passed == 100, std::to_string(passed) + "/100 Gram matrices PSD at tol " + fmt(kPsdTol)};
}

struct Law {
  std::string name;
  std::vector<Distribution1D::Component> parts;
};

double law_pdf(const Law& l, double x) {
  double s = 0.0;
  for (const auto& c : l.parts) {
    const double z = (x - c.mean) / c.stddev;
    s += c.weight * std::exp(-0.5 * z * z) / (c.stddev * std::sqrt(2.0 * std::numbers::pi));
  }
  return s;
}

double law_pdf_derivative(const Law& l, double x) {
  double s = 0.0;
  for (const auto& c : l.parts) {
    const double z = (x - c.mean) / c.stddev;
    s -= c.weight * z / c.stddev * std::exp(-0.5 * z * z) / (c.stddev * std::sqrt(2.0 * std::numbers::pi));
  }
  return s;
}

Outcome ksd_oracle() {
  const std::vector<Law> laws = {{"normal(2,1)", {{1.0, 2.0, 1.0}}},
                                 {"normal(-1,0.6)", {{1.0, -1.0, 0.6}}},
                                 {"mixture", {{0.5, -1.5, 0.6}, {0.5, 1.5, 0.6}}}};
  double worst = 0.0;
  std::string detail;
  for (const auto& law : laws) {
    const auto nu = make_quadrature_ensemble(Distribution1D::mixture(law.parts), 800);
    const double ksd2 = ksd(nu.measure(), k2(), quad());
    // Trapezoid rule for \int\int f(x) K(x - y) f(y), f = rho' + x rho.
    const double L = 10.0, h = 1e-2;
    const int n = static_cast<int>(std::lround(2.0 * L / h));
    std::vector<double> f(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) {
      const double x = -L + i * h;
      f[static_cast<std::size_t>(i)] = (law_pdf_derivative(law, x) + x * law_pdf(law, x)) * ((i == 0 || i == n) ? 0.5 : 1.0);
    }
    const double c = 1.0 / std::sqrt(4.0 * std::numbers::pi);
    double direct = 0.0;
    for (int i = 0; i <= n; ++i) {
      double row = 0.0;
      for (int j = 0; j <= n; ++j) {
        const double r = (i - j) * h;
        row += c * std::exp(-0.25 * r * r) * f[static_cast<std::size_t>(j)];
      }
      direct += f[static_cast<std::size_t>(i)] * row;
    }
    direct *= h * h;
    const double rel = std::abs(ksd2 - direct) / direct;
    worst = std::max(worst, rel);
    detail += law.name + ": ksd " + fmt(ksd2) + " vs quadrature " + fmt(direct) + "; ";
  }
  return {worst < kKsdRelTol, detail + "max relative error " + fmt(worst)};
}

Outcome invariance() {
  const auto target = target_density(quad(), 10.0, 1000);
  const auto& rho_inf = *target.grid;
  double fv_drift = 0.0;
  FvOptions opts;
  opts.cadence = 50;
  fv_solve(rho_inf, k2(), quad(), 5.0,
           {[&](const GridDensity& rho, const PdeDiagnostics&) {
             fv_drift = std::max(fv_drift, wasserstein_1d(rho, rho_inf));
           }},
           opts);

  const auto init = quantile_initialization(Distribution1D::normal(0.0, 1.0), 800);
  const auto mu0 = init.measure();
  double particle_drift = 0.0;
  IntegrateOptions io;
  io.cadence = 100;
  io.compute_ksd = false;
  io.compute_energy = false;
  integrate(init, Dynamics::svgd, k2(), quad(), {IntegrationScheme::rk4, 1e-3, 5.0},
            {[&](const ParticleState& s, const Diagnostics&) {
              particle_drift = std::max(particle_drift, wasserstein_1d(s.measure(), mu0));
            }},
            io);
  return {fv_drift < kInvarianceW1 && particle_drift < kInvarianceW1,
          "FV sup_t W1(rho_t, rho_inf) = " + fmt(fv_drift) + ", SVGD N=800 sup_t W1(mu_t, mu_0) = " +
              fmt(particle_drift)};
}

Outcome kl_monotone() {
  const std::vector<std::pair<std::string, std::vector<double>>> starts = {
      {"normal", {2.0, 1.0}}, {"normal", {-1.5, 0.5}}, {"normal", {0.0, 1.5}},
      {"mixture", {0.5, -2.0, 0.5, 0.5, 2.0, 0.5}}, {"mixture", {0.3, -2.0, 0.7, 0.7, 1.0, 0.5}}};
  double worst_increase = -INFINITY, worst_identity = 0.0;
  for (const auto& [family, params] : starts) {
    const auto law = Distribution1D::from_parameters(family, params);
    const auto rho0 = sample_density(10.0, 1000, [&](double x) { return law.pdf(x); });
    const auto traj = fv_solve(rho0, k2(), quad(), 5.0);
    worst_increase = std::max(worst_increase, traj.max_kl_increase);
    const auto ident = dissipation_identity(rho0, k2(), quad(), 1e-3, 0.5);
    worst_identity = std::max(worst_identity, ident.max_relative_error);
  }
  return {worst_increase <= kKlStepIncrease && worst_identity < kDissipationRelTol,
          "largest per-step KL increase " + fmt(worst_increase) + " over 5 runs; dissipation identity error " +
              fmt(worst_identity)};
}

Outcome mean_field() {
  auto cfg = default_experiment_config("mean-field");
  cfg.times = {1.0};
  cfg.threshold = kMeanFieldFinal;
  const auto r = run_experiment("mean-field", cfg);
  return {criterion_ok(r, "decreasing_t1") && criterion_ok(r, "final_t1"),
          criterion_detail(r, "decreasing_t1") + "; " + criterion_detail(r, "final_t1")};
}

Outcome stability() {
  auto q = default_experiment_config("stability");
  q.threshold = kStabilitySpread;
  auto m = q;
  m.potential = {PotentialFamily::monomial, 1, {1.0, 4.0}};
  const auto rq = run_experiment("stability", q);
  const auto rm = run_experiment("stability", m);
  return {criterion_ok(rq, "bounded_ratio") && criterion_ok(rm, "bounded_ratio"),
          "quadratic: " + criterion_detail(rq, "bounded_ratio") + "; quartic: " + criterion_detail(rm, "bounded_ratio")};
}

Outcome hn_bounds() {
  auto cfg = default_experiment_config("hn-bound");
  cfg.threshold = kUniformSlack;
  const auto r = run_experiment("hn-bound", cfg);
  return {r.pass(), criterion_detail(r, "per_step_bound") + "; " + criterion_detail(r, "lemma_uniform_bound")};
}

Outcome longtime() {
  auto cfg = default_experiment_config("longtime");
  cfg.threshold = kLongtimeW1;
  const auto r = run_experiment("longtime", cfg);
  const auto* series = r.table("series");
  const double residual = series && !series->rows.empty() ? series->rows.back()[4] : INFINITY;
  return {criterion_ok(r, "w1_final") && residual < kLongtimeResidual,
          criterion_detail(r, "w1_final") + "; " + criterion_detail(r, "stein_residual")};
}

Outcome crosscheck() {
  auto cfg = default_experiment_config("crosscheck");
  cfg.threshold = kCrosscheckW1;
  const auto r = run_experiment("crosscheck", cfg);
  std::string detail;
  for (const auto& c : r.criteria) detail += (detail.empty() ? "" : "; ") + c.name + ": " + c.detail;
  return {r.pass(), detail};
}

Outcome mv_contrast() {
  const auto r = run_experiment("mv-comparison", default_experiment_config("mv-comparison"));
  const auto* drift = r.table("drift");
  double svgd = 0.0, mv = 0.0;
  if (drift) {
    for (const auto& row : drift->rows) {
      svgd = std::max(svgd, row[1]);
      mv = std::max(mv, row[2]);
    }
  }
  return {drift && mv >= kMvFactor * svgd,
          "sup_t W1 to rho_inf over [0, 10]: McKean-Vlasov " + fmt(mv) + ", SVGD " + fmt(svgd) + ", ratio " +
              fmt(mv / svgd)};
}

double brute_force(const std::vector<double>& a, std::vector<double> b, double p) {
  std::sort(b.begin(), b.end());
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += std::pow(std::abs(a[i] - b[i]), p);
    best = std::min(best, c);
  } while (std::next_permutation(b.begin(), b.end()));
  return std::pow(best / static_cast<double>(a.size()), 1.0 / p);
}

Outcome wasserstein_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  std::normal_distribution<double> z(0.0, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = size(rng);
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = z(rng);
    for (auto& x : b) x = z(rng);
    const double p = (t % 2 == 0) ? 1.0 : 2.0;
    const double oracle = brute_force(a, b, p);
    const double got = wasserstein_1d(EmpiricalMeasure::uniform(a), EmpiricalMeasure::uniform(b), p);
    worst = std::max(worst, std::abs(got - oracle) / std::max(oracle, 1e-300));
  }
  const auto target = target_density(quad(), 12.0, 4000);
  double kl_worst = 0.0;
  for (auto [m, s] : {std::pair{1.0, 1.0}, {2.0, 1.0}, {0.0, 0.5}, {-1.0, 1.5}}) {
    const auto law = Distribution1D::normal(m, s);
    const auto rho = sample_density(12.0, 4000, [&](double x) { return law.pdf(x); });
    const double exact = 0.5 * (s * s + m * m - 1.0) - std::log(s);
    kl_worst = std::max(kl_worst, std::abs(kl_grid(rho, target) - exact));
  }
  return {worst <= kWassersteinRel && kl_worst < kKlClosedForm,
          "max relative W_p error vs brute force " + fmt(worst) + " on 200 instances; max KL error " + fmt(kl_worst)};
}

Outcome derivative_suite() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 0.0;
  auto track = [&](double fd, double exact, double scale) {
    worst = std::max(worst, std::abs(fd - exact) / std::max(scale, std::abs(exact)));
  };
  const double h = 1e-5;
  for (std::size_t d = 1; d <= 2; ++d) {
    const Kernel k(KernelFamily::gaussian, 2.0, d);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(d);
      for (auto& v : x) v = u(rng);
      const auto e = kernel_eval(k, x);
      for (std::size_t a = 0; a < d; ++a) {
        auto xp = x, xm = x;
        xp[a] += h;
        xm[a] -= h;
        const auto ia = static_cast<Eigen::Index>(a);
        track((k.value(xp) - k.value(xm)) / (2 * h), e.gradient[ia], k.sup_norm(1));
        const auto gp = kernel_eval(k, xp).gradient, gm = kernel_eval(k, xm).gradient;
        for (std::size_t b = 0; b < d; ++b) {
          const auto ib = static_cast<Eigen::Index>(b);
          track((gp[ib] - gm[ib]) / (2 * h), e.hessian(ib, ia), k.sup_norm(2));
        }
      }
    }
  }
  Eigen::MatrixXd A(2, 2);
  A << 1.5, 0.3, 0.3, 0.8;
  for (const auto& V : {Potential::quadratic(A), Potential::monomial(1.0, 4, 1), Potential::monomial(0.5, 6, 2),
                        Potential::double_well(1.0, 1.0)}) {
    const std::size_t d = V.dimension();
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(d);
      for (auto& v : x) v = u(rng);
      const auto e = potential_eval(V, x);
      for (std::size_t a = 0; a < d; ++a) {
        auto xp = x, xm = x;
        xp[a] += h;
        xm[a] -= h;
        const auto ia = static_cast<Eigen::Index>(a);
        track((V.value(xp) - V.value(xm)) / (2 * h), e.gradient[ia], 1.0);
        const auto gp = potential_eval(V, xp).gradient, gm = potential_eval(V, xm).gradient;
        for (std::size_t b = 0; b < d; ++b) {
          const auto ib = static_cast<Eigen::Index>(b);
          track((gp[ib] - gm[ib]) / (2 * h), e.hessian(ib, ia), 1.0);
        }
      }
    }
  }

  // N = 1: x' = -K(0) x, so x(t) = x0 exp(-K(0) t).
  ParticleState one;
  one.positions = {1.5};
  const double exact = 1.5 * std::exp(-k2().peak() * 2.0);
  std::vector<double> errs;
  for (double dt : {0.4, 0.2, 0.1, 0.05}) {
    const auto tr = integrate(one, Dynamics::svgd, k2(), quad(), {IntegrationScheme::rk4, dt, 2.0}, {},
                              {.cadence = 1000, .compute_ksd = false, .compute_energy = false});
    errs.push_back(std::abs(tr.final_state.positions[0] - exact));
  }
  double min_order = INFINITY;
  for (std::size_t i = 1; i < errs.size(); ++i) min_order = std::min(min_order, std::log2(errs[i - 1] / errs[i]));
  return {worst < kFiniteDiffRel && min_order > 3.8 && min_order < 4.2,
          "max relative finite-difference error " + fmt(worst) + "; RK4 observed order " + fmt(min_order)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"kernel_psd", kernel_psd},
      {"ksd_quadrature_oracle", ksd_oracle},
      {"target_invariance", invariance},
      {"kl_monotone", kl_monotone},
      {"mean_field_convergence", mean_field},
      {"stability_ratio", stability},
      {"hn_bounds", hn_bounds},
      {"longtime_convergence", longtime},
      {"solver_crosscheck", crosscheck},
      {"mckean_vlasov_contrast", mv_contrast},
      {"wasserstein_oracle", wasserstein_oracle},
      {"derivative_suite", derivative_suite},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <criterion 1-%zu>\n", criteria().size());
    return 2;
  }
  const int id = std::atoi(argv[1]);
  if (id < 1 || id > static_cast<int>(criteria().size())) {
    std::fprintf(stderr, "no criterion %s\n", argv[1]);
    return 2;
  }
  const auto& c = criteria()[static_cast<std::size_t>(id - 1)];
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = c.run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, c.name, o.detail.c_str(), secs);
  return o.pass ? 0 : 1;
}
