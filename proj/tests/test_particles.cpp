#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "steinflow/error.hpp"
#include "steinflow/parallel.hpp"
#include "steinflow/particles.hpp"

using namespace steinflow;

namespace {

const Kernel k2(KernelFamily::gaussian, 2.0, 1);
const Potential quad = Potential::quadratic(Eigen::MatrixXd::Identity(1, 1));

ParticleState state1d(std::vector<double> xs) {
  ParticleState s;
  s.positions = std::move(xs);
  return s;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Direct double loop, written independently of the library.
std::vector<double> naive_svgd(const std::vector<double>& x, double s, double a) {
  const double c = 1.0 / std::sqrt(2.0 * M_PI * s);
  std::vector<double> v(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = x[i] - x[j];
      const double kv = c * std::exp(-r * r / (2.0 * s));
      v[i] -= (-r / s) * kv + kv * a * x[j];
    }
    v[i] /= static_cast<double>(x.size());
  }
  return v;
}

}  // namespace

TEST_CASE("two-particle velocities") {
  const auto s = state1d({0.0, 2.0});
  const auto v = svgd_velocity(s, k2, quad);
  // v_0 = -(1/2)[K'(-2) + K(0) * 0 + K(-2) * 2]
  const double K2 = k2.value_1d(2.0);
  CHECK(v[0] == doctest::Approx(-0.5 * (K2 + 2.0 * K2)).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(-0.5 * (-K2 + 2.0 * k2.peak())).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(-0.2820948 + 0.5 * K2).epsilon(1e-6));

  const auto mv = mckean_vlasov_velocity(s, k2, quad);
  CHECK(mv[0] == doctest::Approx(-0.5 * K2).epsilon(1e-14));
  CHECK(mv[1] == doctest::Approx(0.5 * K2 - 2.0).epsilon(1e-14));

  const auto one = state1d({1.0});
  CHECK(svgd_velocity(one, k2, quad)[0] == doctest::Approx(-0.2820948).epsilon(1e-6));
  CHECK(mckean_vlasov_velocity(one, k2, quad)[0] == -1.0);
}

TEST_CASE("svgd velocity matches a naive double loop") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(1.0, 2.0);
  const Kernel k(KernelFamily::gaussian, 1.3, 1);
  const auto V = Potential::quadratic(Eigen::MatrixXd::Constant(1, 1, 0.7));
  std::vector<double> xs(37);
  for (auto& x : xs) x = z(rng);
  CHECK(max_abs_diff(svgd_velocity(state1d(xs), k, V), naive_svgd(xs, 1.3, 0.7)) < 1e-14);
}

TEST_CASE("symmetry properties") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 1.5);
  std::vector<double> xs(25);
  for (auto& x : xs) x = z(rng);
  const auto v = svgd_velocity(state1d(xs), k2, quad);

  // Odd potential gradient and even kernel: mirroring the cloud mirrors the field.
  std::vector<double> mirrored(xs);
  for (auto& x : mirrored) x = -x;
  const auto vm = svgd_velocity(state1d(mirrored), k2, quad);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(vm[i] == doctest::Approx(-v[i]).epsilon(1e-12));

  // Permutation equivariance.
  std::vector<std::size_t> perm(xs.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> permuted(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) permuted[i] = xs[perm[i]];
  const auto vp = svgd_velocity(state1d(permuted), k2, quad);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(vp[i] == doctest::Approx(v[perm[i]]).epsilon(1e-12));

  // The interaction term alone (V = 0 limit via MV minus confinement) is
  // translation invariant.
  std::vector<double> shifted(xs);
  for (auto& x : shifted) x += 3.0;
  const auto a = mckean_vlasov_velocity(state1d(xs), k2, quad);
  const auto b = mckean_vlasov_velocity(state1d(shifted), k2, quad);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK((b[i] + shifted[i]) == doctest::Approx(a[i] + xs[i]).epsilon(1e-12));
  }

  // Pairwise repulsion sums to zero.
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) total += a[i] + xs[i];
  CHECK(std::abs(total) < 1e-13);
}

TEST_CASE("energy and Lyapunov functional") {
  const auto s = state1d({1.0, -1.0});
  CHECK(h_n(s, quad) == 1.5);
  CHECK(h_n(state1d({-1.0, 1.0, std::sqrt(2.0)}), quad) == doctest::Approx(1.0 + 2.0 / 3.0));
  CHECK(interaction_energy(state1d({0.0, 0.0}), k2) == doctest::Approx(0.1410474).epsilon(1e-6));
  CHECK(interaction_energy(state1d({0.5}), k2) == 0.0);

  const auto q = potential_quadratic_form(state1d({0.3, -1.2, 2.0}), k2, quad);
  CHECK(q.value >= 0.0);
  CHECK(q.scale >= q.value);
}

TEST_CASE("h_n of two standard particles") {
  CHECK(h_n(state1d({1.0, 1.0}), Potential::monomial(1.0, 2, 1)) == 2.0);
}

TEST_CASE("rk4 matches a fine reference and has order four") {
  const auto init = quantile_initialization(Distribution1D::normal(2.0, 1.0), 8);
  auto run = [&](double dt) {
    return integrate(init, Dynamics::svgd, k2, quad, {IntegrationScheme::rk4, dt, 1.0}, {},
                     {.cadence = 1000000, .compute_ksd = false, .compute_energy = false})
        .final_state.positions;
  };
  const auto ref = run(1e-3);
  const double e1 = max_abs_diff(run(0.1), ref);
  const double e2 = max_abs_diff(run(0.05), ref);
  CHECK(e2 < 1e-6);
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.15));
  const double e_fine = max_abs_diff(run(5e-3), ref);
  CHECK(e_fine < 1e-9);

  auto euler = [&](double dt) {
    return integrate(init, Dynamics::svgd, k2, quad, {IntegrationScheme::explicit_euler, dt, 1.0}, {},
                     {.cadence = 1000000, .compute_ksd = false, .compute_energy = false})
        .final_state.positions;
  };
  const double f1 = max_abs_diff(euler(0.02), ref), f2 = max_abs_diff(euler(0.01), ref);
  CHECK(f1 / f2 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("integrator bookkeeping") {
  const auto init = quantile_initialization(Distribution1D::normal(0.0, 1.0), 16);
  std::size_t calls = 0;
  const auto traj = integrate(init, Dynamics::svgd, k2, quad, {IntegrationScheme::rk4, 0.01, 5.0},
                              {[&](const ParticleState&, const Diagnostics&) { ++calls; }},
                              {.cadence = 1, .record_snapshots = true});
  CHECK(calls == 501);
  CHECK(traj.series.size() == 501);
  CHECK(traj.snapshots.size() == 501);
  CHECK(traj.final_state.time == 5.0);
  CHECK(traj.final_state.step_count == 500);
  CHECK(traj.series.back().step == 500);

  const auto sparse = integrate(init, Dynamics::svgd, k2, quad, {IntegrationScheme::rk4, 0.03, 1.0}, {},
                                {.cadence = 10});
  // steps = 34 (last one shortened): observed at 0, 10, 20, 30, 34
  CHECK(sparse.series.size() == 5);
  CHECK(sparse.final_state.time == 1.0);

  CHECK_THROWS_AS((IntegratorSpec{IntegrationScheme::rk4, 0.0, 1.0}.validate()), InvalidParameter);
  CHECK_THROWS_AS((IntegratorSpec{IntegrationScheme::rk4, 2.0, 1.0}.validate()), InvalidParameter);
  CHECK(IntegratorSpec{IntegrationScheme::rk4, 0.1, 1.0}.steps() == 10);
}

TEST_CASE("blowup is reported with the particle index") {
  auto s = state1d({0.0, 1.0, 2.0});
  const VelocityFn wild = [](const ParticleState& st, std::vector<double>& out) {
    out.assign(st.size(), 0.0);
    out[2] = 1e12;
  };
  try {
    (void)step(s, wild, {IntegrationScheme::explicit_euler, 1.0, 1.0});
    FAIL("expected NumericalBlowup");
  } catch (const NumericalBlowup& e) {
    CHECK(e.particle() == 2);
  }
  const VelocityFn nan = [](const ParticleState& st, std::vector<double>& out) {
    out.assign(st.size(), 0.0);
    out[1] = std::nan("");
  };
  CHECK_THROWS_AS((void)step(s, nan, {IntegrationScheme::rk4, 0.1, 1.0}), NumericalBlowup);
}

TEST_CASE("ula is seeded and samples the target") {
  const auto init = iid_initialization(Distribution1D::normal(3.0, 0.1), 4000, 1, 9);
  const IntegratorSpec spec{IntegrationScheme::explicit_euler, 0.01, 10.0};
  const IntegrateOptions opts{.cadence = 100000, .seed = 42, .compute_ksd = false, .compute_energy = false};
  const auto a = integrate(init, Dynamics::ula, k2, quad, spec, {}, opts);
  const auto b = integrate(init, Dynamics::ula, k2, quad, spec, {}, opts);
  CHECK(a.final_state.positions == b.final_state.positions);
  double m = 0.0, m2 = 0.0;
  for (double x : a.final_state.positions) {
    m += x;
    m2 += x * x;
  }
  m /= 4000.0;
  m2 /= 4000.0;
  CHECK(std::abs(m) < 0.08);
  // Euler-Maruyama on the OU process has stationary variance 1 / (1 - dt/2).
  CHECK(m2 - m * m == doctest::Approx(1.0 / (1.0 - 0.005)).epsilon(0.08));
}

TEST_CASE("iid and quantile initialization") {
  const auto a = iid_initialization(Distribution1D::normal(0.0, 1.0), 100, 2, 7);
  const auto b = iid_initialization(Distribution1D::normal(0.0, 1.0), 100, 2, 7);
  CHECK(a.positions == b.positions);
  CHECK(a.size() == 100);
  CHECK(a.dimension == 2);
  const auto q = quantile_initialization(Distribution1D::normal(1.0, 2.0), 5);
  CHECK(q.positions[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::is_sorted(q.positions.begin(), q.positions.end()));
}

TEST_CASE("H_N growth respects the Lyapunov bound") {
  const auto V = Potential::monomial(1.0, 4, 1);
  const double C = lyapunov_growth_rate(k2, V);
  CHECK(C == doctest::Approx(k2.sup_norm(1) * std::pow(V.gradient_growth_constant(), 0.75)).epsilon(1e-14));
  const auto init = iid_initialization(Distribution1D::normal(0.0, 0.5), 64, 1, 3);
  const double dt = 5e-3;
  const auto traj = integrate(init, Dynamics::svgd, k2, V, {IntegrationScheme::rk4, dt, 2.0}, {},
                              {.compute_ksd = false, .compute_energy = false});
  for (std::size_t n = 1; n < traj.series.size(); ++n) {
    const double rate = std::log(traj.series[n].h_n / traj.series[n - 1].h_n) / dt;
    CHECK(rate <= C);
  }
  const double Cq = lyapunov_growth_rate(k2, quad);
  CHECK(Cq == doctest::Approx(k2.sup_norm(1) * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("dissipation quadratic form stays nonnegative") {
  const auto init = iid_initialization(Distribution1D::normal(1.0, 2.0), 50, 1, 11);
  const auto traj = integrate(init, Dynamics::svgd, k2, quad, {IntegrationScheme::rk4, 0.05, 3.0}, {},
                              {.cadence = 5, .record_snapshots = true});
  const auto report = ksd_dissipation_check(traj, k2, quad);
  CHECK(report.passed);
  CHECK(report.forms.size() == traj.snapshots.size());
  CHECK(report.min_form >= -1e-10 * report.scale_at_min);
  TrajectorySummary empty;
  CHECK_THROWS_AS(ksd_dissipation_check(empty, k2, quad), InvalidInput);
}

TEST_CASE("results do not depend on the worker count") {
  const auto init = iid_initialization(Distribution1D::normal(0.0, 2.0), 700, 1, 5);
  set_worker_count(1);
  const auto a = svgd_velocity(init, k2, quad);
  set_worker_count(4);
  const auto b = svgd_velocity(init, k2, quad);
  set_worker_count(0);
  CHECK(a == b);
}

TEST_CASE("dimension and parameter errors") {
  const Kernel k3(KernelFamily::gaussian, 2.0, 3);
  CHECK_THROWS_AS(svgd_velocity(state1d({0.0, 1.0}), k3, quad), InvalidInput);
  CHECK_THROWS_AS(parse_dynamics("hmc"), InvalidParameter);
  CHECK_THROWS_AS(parse_scheme("rk2"), InvalidParameter);
  CHECK(parse_dynamics("mckean-vlasov") == Dynamics::mckean_vlasov);
  CHECK(parse_scheme("rk4") == IntegrationScheme::rk4);
  const auto init = quantile_initialization(Distribution1D::normal(0.0, 1.0), 4);
  CHECK_THROWS_AS(integrate(init, Dynamics::svgd, k2, quad, {IntegrationScheme::rk4, 0.1, 1.0}, {}, {.cadence = 0}),
                  InvalidParameter);
}
