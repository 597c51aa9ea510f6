#include "steinflow/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "steinflow/error.hpp"
#include "steinflow/parallel.hpp"

namespace steinflow {
namespace {

constexpr double kBlowupRadius = 1e8;

void check_dimensions(const ParticleState& state, const Kernel& k, const Potential& V) {
  if (state.dimension != k.dimension() || state.dimension != V.dimension()) {
    std::ostringstream msg;
    msg << "dimension mismatch: state " << state.dimension << ", kernel " << k.dimension()
        << ", potential " << V.dimension();
    throw InvalidInput(msg.str());
  }
  if (state.size() == 0) throw InvalidInput("particle state is empty");
}

std::vector<double> potential_gradients(const ParticleState& state, const Potential& V) {
  const std::size_t n = state.size(), d = state.dimension;
  std::vector<double> g(n * d);
  if (d == 1) {
    for (std::size_t i = 0; i < n; ++i) g[i] = V.gradient_1d(state.positions[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) V.value_and_gradient(state.point(i), {g.data() + i * d, d});
  }
  return g;
}

// Shared pair loop: v_i = (1/N) sum_j [ -gradK(x_i - x_j) - K(x_i - x_j) c_j ],
// where c_j = gradV(x_j) (SVGD) or c_j = 0 (McKean-Vlasov repulsion only).
void pair_velocity(const ParticleState& state, const Kernel& k, const std::vector<double>* weights_grad,
                   std::vector<double>& out) {
  const std::size_t n = state.size(), d = state.dimension;
  out.assign(n * d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_var = 1.0 / k.variance();
  const double* x = state.positions.data();
  const std::size_t chunk = std::max<std::size_t>(1, 4096 / std::max<std::size_t>(1, n));
  if (d == 1) {
    const double* g = weights_grad ? weights_grad->data() : nullptr;
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const double xi = x[i];
        double acc = 0.0;
        if (g) {
          for (std::size_t j = 0; j < n; ++j) {
            const double r = xi - x[j];
            const double kv = k.value_1d(r);
            acc += kv * (r * inv_var - g[j]);
          }
        } else {
          for (std::size_t j = 0; j < n; ++j) {
            const double r = xi - x[j];
            acc += k.value_1d(r) * r * inv_var;
          }
        }
        out[i] = acc * inv_n;
      }
    }, chunk);
    return;
  }
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> diff(d), gk(d), acc(d);
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t a = 0; a < d; ++a) diff[a] = x[i * d + a] - x[j * d + a];
        const double kv = k.value_and_gradient(diff, gk);
        for (std::size_t a = 0; a < d; ++a) {
          acc[a] -= gk[a];
          if (weights_grad) acc[a] -= kv * (*weights_grad)[j * d + a];
        }
      }
      for (std::size_t a = 0; a < d; ++a) out[i * d + a] = acc[a] * inv_n;
    }
  }, chunk);
}

void check_finite(const ParticleState& state, double time) {
  const std::size_t d = state.dimension;
  for (std::size_t i = 0; i < state.positions.size(); ++i) {
    const double v = state.positions[i];
    if (!std::isfinite(v) || std::abs(v) > kBlowupRadius) {
      std::ostringstream msg;
      msg << "particle " << i / d << " left the admissible region (coordinate " << v << ") at t = " << time;
      throw NumericalBlowup(msg.str(), i / d, time);
    }
  }
}

void check_velocity(const std::vector<double>& v, std::size_t d, double time) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream msg;
      msg << "non-finite velocity for particle " << i / d << " at t = " << time;
      throw NumericalBlowup(msg.str(), i / d, time);
    }
  }
}

}  // namespace

std::string to_string(IntegrationScheme scheme) {
  return scheme == IntegrationScheme::rk4 ? "rk4" : "explicit-euler";
}

std::string to_string(Dynamics dynamics) {
  switch (dynamics) {
    case Dynamics::svgd:
      return "svgd";
    case Dynamics::mckean_vlasov:
      return "mckean-vlasov";
    case Dynamics::ula:
      return "ula";
  }
  return "unknown";
}

IntegrationScheme parse_scheme(const std::string& name) {
  if (name == "explicit-euler" || name == "euler") return IntegrationScheme::explicit_euler;
  if (name == "rk4") return IntegrationScheme::rk4;
  throw InvalidParameter("unknown integration scheme '" + name + "' (expected explicit-euler or rk4)");
}

Dynamics parse_dynamics(const std::string& name) {
  if (name == "svgd") return Dynamics::svgd;
  if (name == "mckean-vlasov" || name == "mv") return Dynamics::mckean_vlasov;
  if (name == "ula") return Dynamics::ula;
  throw InvalidParameter("unknown dynamics '" + name + "' (expected svgd, mckean-vlasov or ula)");
}

void IntegratorSpec::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("integrator dt must be positive");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw InvalidParameter("integrator t_final must be positive");
  if (dt > t_final * (1.0 + 1e-12)) throw InvalidParameter("integrator dt must not exceed t_final");
}

std::size_t IntegratorSpec::steps() const {
  const double ratio = t_final / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) return std::max<std::size_t>(1, static_cast<std::size_t>(nearest));
  return static_cast<std::size_t>(std::ceil(ratio));
}

std::vector<double> svgd_velocity(const ParticleState& state, const Kernel& k, const Potential& V) {
  std::vector<double> out;
  svgd_velocity(state, k, V, out);
  return out;
}

void svgd_velocity(const ParticleState& state, const Kernel& k, const Potential& V, std::vector<double>& out) {
  check_dimensions(state, k, V);
  const std::vector<double> g = potential_gradients(state, V);
  pair_velocity(state, k, &g, out);
}

std::vector<double> mckean_vlasov_velocity(const ParticleState& state, const Kernel& k, const Potential& V) {
  std::vector<double> out;
  mckean_vlasov_velocity(state, k, V, out);
  return out;
}

void mckean_vlasov_velocity(const ParticleState& state, const Kernel& k, const Potential& V,
                            std::vector<double>& out) {
  check_dimensions(state, k, V);
  pair_velocity(state, k, nullptr, out);
  const std::vector<double> g = potential_gradients(state, V);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= g[i];
}

ParticleState ula_step(const ParticleState& state, const Potential& V, double dt, std::mt19937_64& rng) {
  if (!(dt > 0.0)) throw InvalidParameter("ula_step: dt must be positive");
  if (state.dimension != V.dimension()) throw InvalidInput("ula_step: dimension mismatch");
  const std::vector<double> g = potential_gradients(state, V);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise = std::sqrt(2.0 * dt);
  ParticleState next = state;
  for (std::size_t i = 0; i < next.positions.size(); ++i) {
    next.positions[i] += -g[i] * dt + noise * normal(rng);
  }
  next.time += dt;
  next.step_count += 1;
  check_finite(next, next.time);
  return next;
}

ParticleState step(const ParticleState& state, const VelocityFn& velocity, const IntegratorSpec& spec) {
  if (!(spec.dt > 0.0)) throw InvalidParameter("step: dt must be positive");
  const double dt = spec.dt;
  const std::size_t d = state.dimension;
  ParticleState next = state;
  std::vector<double> k1;
  velocity(state, k1);
  check_velocity(k1, d, state.time);

  if (spec.scheme == IntegrationScheme::explicit_euler) {
    for (std::size_t i = 0; i < next.positions.size(); ++i) next.positions[i] += dt * k1[i];
  } else {
    ParticleState stage = state;
    std::vector<double> k2, k3, k4;
    auto shift = [&](const std::vector<double>& v, double h) {
      for (std::size_t i = 0; i < stage.positions.size(); ++i) stage.positions[i] = state.positions[i] + h * v[i];
    };
    shift(k1, 0.5 * dt);
    stage.time = state.time + 0.5 * dt;
    velocity(stage, k2);
    check_velocity(k2, d, stage.time);
    shift(k2, 0.5 * dt);
    velocity(stage, k3);
    check_velocity(k3, d, stage.time);
    shift(k3, dt);
    stage.time = state.time + dt;
    velocity(stage, k4);
    check_velocity(k4, d, stage.time);
    for (std::size_t i = 0; i < next.positions.size(); ++i) {
      next.positions[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
  }
  next.time = state.time + dt;
  next.step_count = state.step_count + 1;
  check_finite(next, next.time);
  return next;
}

double h_n(const ParticleState& state, const Potential& V) {
  if (state.size() == 0) return 1.0;
  double total = 0.0;
  if (state.dimension == 1) {
    for (double x : state.positions) total += V.value_1d(x);
  } else {
    for (std::size_t i = 0; i < state.size(); ++i) total += V.value(state.point(i));
  }
  return total / static_cast<double>(state.size()) + 1.0;
}

double interaction_energy(const ParticleState& state, const Kernel& k) {
  const std::size_t n = state.size(), d = state.dimension;
  if (n < 2) return 0.0;
  double total = 0.0;
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d == 1) {
        total += k.value_1d(state.positions[i] - state.positions[j]);
      } else {
        for (std::size_t a = 0; a < d; ++a) diff[a] = state.positions[i * d + a] - state.positions[j * d + a];
        total += k.value(diff);
      }
    }
  }
  return total / static_cast<double>(n);
}

QuadraticForm potential_quadratic_form(const ParticleState& state, const Kernel& k, const Potential& V) {
  check_dimensions(state, k, V);
  const std::size_t n = state.size(), d = state.dimension;
  const std::vector<double> g = potential_gradients(state, V);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a < d; ++a) s += g[i * d + a] * g[i * d + a];
    norms[i] = std::sqrt(s);
  }
  QuadraticForm q;
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t a = 0; a < d; ++a) diff[a] = state.positions[i * d + a] - state.positions[j * d + a];
      const double kv = d == 1 ? k.value_1d(diff[0]) : k.value(diff);
      double dot = 0.0;
      for (std::size_t a = 0; a < d; ++a) dot += g[i * d + a] * g[j * d + a];
      q.value += kv * dot;
      q.scale += std::abs(kv) * norms[i] * norms[j];
    }
  }
  return q;
}

TrajectorySummary integrate(const ParticleState& initial, Dynamics dynamics, const Kernel& k,
                            const Potential& V, const IntegratorSpec& spec,
                            const std::vector<Observer>& observers, const IntegrateOptions& options) {
  spec.validate();
  if (options.cadence == 0) throw InvalidParameter("observer cadence must be at least 1 step");
  if (dynamics == Dynamics::ula) {
    if (initial.dimension != V.dimension()) throw InvalidInput("dimension mismatch between state and potential");
  } else {
    check_dimensions(initial, k, V);
  }
  check_finite(initial, initial.time);

  TrajectorySummary summary;
  auto observe = [&](const ParticleState& s) {
    Diagnostics diag;
    diag.time = s.time;
    diag.step = s.step_count;
    diag.h_n = h_n(s, V);
    if (options.compute_energy) diag.energy = interaction_energy(s, k);
    if (options.compute_ksd && s.dimension == k.dimension()) diag.ksd2 = ksd(s.measure(), k, V);
    if (options.reference && s.dimension == 1) {
      diag.w_ref = wasserstein_1d(s.measure(), *options.reference, options.reference_p);
    }
    for (const auto& obs : observers) obs(s, diag);
    summary.series.push_back(diag);
    if (options.record_snapshots) summary.snapshots.push_back(s);
  };

  VelocityFn velocity;
  if (dynamics == Dynamics::svgd) {
    velocity = [&](const ParticleState& s, std::vector<double>& out) { svgd_velocity(s, k, V, out); };
  } else if (dynamics == Dynamics::mckean_vlasov) {
    velocity = [&](const ParticleState& s, std::vector<double>& out) { mckean_vlasov_velocity(s, k, V, out); };
  }
  std::mt19937_64 rng(options.seed);

  ParticleState state = initial;
  const std::size_t steps = spec.steps();
  const double t_end = initial.time + spec.t_final;
  observe(state);
  for (std::size_t n = 1; n <= steps; ++n) {
    IntegratorSpec local = spec;
    local.dt = (n == steps) ? t_end - state.time : spec.dt;
    if (dynamics == Dynamics::ula) {
      state = ula_step(state, V, local.dt, rng);
    } else {
      state = step(state, velocity, local);
    }
    state.time = (n == steps) ? t_end : initial.time + static_cast<double>(n) * spec.dt;
    if (n % options.cadence == 0 || n == steps) observe(state);
  }
  summary.final_state = std::move(state);
  return summary;
}

DissipationReport ksd_dissipation_check(const TrajectorySummary& trajectory, const Kernel& k,
                                        const Potential& V) {
  if (trajectory.snapshots.empty()) {
    throw InvalidInput("ksd_dissipation_check needs recorded snapshots (record_snapshots = true)");
  }
  DissipationReport report;
  report.min_form = std::numeric_limits<double>::infinity();
  for (const auto& s : trajectory.snapshots) {
    const QuadraticForm q = potential_quadratic_form(s, k, V);
    report.forms.push_back(q.value);
    if (q.value < report.min_form) {
      report.min_form = q.value;
      report.scale_at_min = q.scale;
      report.min_time = s.time;
    }
    if (q.value < -1e-10 * q.scale) report.passed = false;
  }
  return report;
}

ParticleState quantile_initialization(const Distribution1D& law, std::size_t count) {
  if (count == 0) throw InvalidParameter("particle count must be at least 1");
  ParticleState s;
  s.dimension = 1;
  s.positions = quantile_points(law, count);
  return s;
}

ParticleState iid_initialization(const Distribution1D& law, std::size_t count, std::size_t dimension,
                                 std::uint64_t seed) {
  if (count == 0 || dimension == 0) throw InvalidParameter("particle count and dimension must be positive");
  ParticleState s;
  s.dimension = dimension;
  s.positions.resize(count * dimension);
  std::mt19937_64 rng(seed);
  for (double& v : s.positions) v = law.sample(rng);
  return s;
}

double lyapunov_growth_rate(const Kernel& k, const Potential& V) {
  return k.sup_norm(1) * std::pow(V.gradient_growth_constant(), 1.0 / V.assumption_index());
}

}  // namespace steinflow
