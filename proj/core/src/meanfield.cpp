#include "steinflow/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

#include <Eigen/Dense>

#include "steinflow/error.hpp"
#include "steinflow/parallel.hpp"
#include "steinflow/particles.hpp"

namespace steinflow {
namespace {

constexpr double kBoundaryTol = 1e-8;
constexpr double kBlowupRadius = 1e8;

void require_1d(const Kernel& k, const Potential& V, const char* who) {
  if (k.dimension() != 1 || V.dimension() != 1) {
    throw InvalidInput(std::string(who) + ": mean-field solvers are one-dimensional");
  }
}

// Kernel values sampled at multiples of h, offset by `shift` cells:
// entry n + M holds K^(order)((n + shift) h) for n in [-M, M].
struct OffsetTable {
  std::size_t cells = 0;
  std::vector<double> k0, k1, k2;

  OffsetTable(const Kernel& k, std::size_t m, double h, double shift, bool second) : cells(m) {
    const std::size_t len = 2 * m + 1;
    k0.resize(len);
    k1.resize(len);
    if (second) k2.resize(len);
    const double inv_var = 1.0 / k.variance();
    for (std::size_t i = 0; i < len; ++i) {
      const double r = (static_cast<double>(i) - static_cast<double>(m) + shift) * h;
      const double kv = k.value_1d(r);
      k0[i] = kv;
      k1[i] = -r * inv_var * kv;
      if (second) k2[i] = (r * r * inv_var - 1.0) * inv_var * kv;
    }
  }
};

std::vector<double> drift_weights(const GridDensity& rho, const Potential& V) {
  std::vector<double> a(rho.cells());
  for (std::size_t j = 0; j < a.size(); ++j) a[j] = V.gradient_1d(rho.center(j)) * rho.values[j];
  return a;
}

// out[i] = -h sum_j (t1[i - j] rho_j + t0[i - j] a_j), with t* indexed from offset M.
// With a == nullptr only the t1 term is kept.
void toeplitz_apply(const std::vector<double>& t1, const std::vector<double>& t0, const double* rho,
                    const double* a, std::size_t m, std::size_t outputs, double h, double* out) {
  parallel_for(
      outputs,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const double* p1 = t1.data() + i + m;
          const double* p0 = t0.data() + i + m;
          double acc = 0.0;
          if (a) {
            for (std::size_t j = 0; j < m; ++j) acc += p1[-static_cast<std::ptrdiff_t>(j)] * rho[j] +
                                                        p0[-static_cast<std::ptrdiff_t>(j)] * a[j];
          } else {
            for (std::size_t j = 0; j < m; ++j) acc += p1[-static_cast<std::ptrdiff_t>(j)] * rho[j];
          }
          out[i] = -h * acc;
        }
      },
      16);
}

// Velocities at the M - 1 interior faces.
std::vector<double> face_velocities(const GridDensity& rho, const OffsetTable& faces, const Potential& V) {
  const std::size_t m = rho.cells();
  const auto a = drift_weights(rho, V);
  std::vector<double> u(m - 1);
  toeplitz_apply(faces.k1, faces.k0, rho.values.data(), a.data(), m, m - 1, rho.cell_width(), u.data());
  return u;
}

VelocityField centre_velocity(const GridDensity& rho, const OffsetTable& centres, const Potential& V,
                              VelocityModel model, bool with_divergence) {
  const std::size_t m = rho.cells();
  const double h = rho.cell_width();
  VelocityField field;
  field.positions.resize(m);
  for (std::size_t i = 0; i < m; ++i) field.positions[i] = rho.center(i);
  field.values.resize(m);
  if (with_divergence) field.divergence.resize(m);
  if (model == VelocityModel::svgd) {
    const auto a = drift_weights(rho, V);
    toeplitz_apply(centres.k1, centres.k0, rho.values.data(), a.data(), m, m, h, field.values.data());
    if (with_divergence) {
      toeplitz_apply(centres.k2, centres.k1, rho.values.data(), a.data(), m, m, h, field.divergence.data());
    }
  } else {
    toeplitz_apply(centres.k1, centres.k0, rho.values.data(), nullptr, m, m, h, field.values.data());
    for (std::size_t i = 0; i < m; ++i) field.values[i] -= V.gradient_1d(field.positions[i]);
    if (with_divergence) {
      toeplitz_apply(centres.k2, centres.k1, rho.values.data(), nullptr, m, m, h, field.divergence.data());
      for (std::size_t i = 0; i < m; ++i) field.divergence[i] -= V.hessian_1d(field.positions[i]);
    }
  }
  return field;
}

double dissipation_from(const GridDensity& rho, const VelocityField& field, const Potential& V) {
  double total = 0.0;
  for (std::size_t i = 0; i < rho.cells(); ++i) {
    total += rho.values[i] * (field.divergence[i] - V.gradient_1d(field.positions[i]) * field.values[i]);
  }
  return total * rho.cell_width();
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Upwind update with given face velocities. Returns the largest outflow fraction.
double upwind_update(const GridDensity& rho, const std::vector<double>& u, double dt, GridDensity& out) {
  const std::size_t m = rho.cells();
  const double lambda = dt / rho.cell_width();
  std::vector<double> flux(m - 1);
  for (std::size_t f = 0; f + 1 < m; ++f) {
    flux[f] = u[f] > 0.0 ? u[f] * rho.values[f] : u[f] * rho.values[f + 1];
  }
  double worst = 0.0;
  out.half_width = rho.half_width;
  out.time = rho.time + dt;
  out.values.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double right = j + 1 < m ? flux[j] : 0.0;
    const double left = j > 0 ? flux[j - 1] : 0.0;
    const double outflow = (j + 1 < m ? std::max(u[j], 0.0) : 0.0) + (j > 0 ? std::max(-u[j - 1], 0.0) : 0.0);
    worst = std::max(worst, lambda * outflow);
    out.values[j] = rho.values[j] - lambda * (right - left);
  }
  return worst;
}

void check_boundary(const GridDensity& rho) {
  if (rho.boundary_mass() >= kBoundaryTol) {
    std::ostringstream msg;
    msg << "boundary cells carry mass " << rho.boundary_mass() << " at t = " << rho.time
        << "; enlarge the domain";
    throw TruncationError(msg.str(), rho.boundary_mass());
  }
}

// U and div U at `where` generated by sum_j w_j delta_{X_j}; g_j = V'(X_j).
void ensemble_velocity(const double* X, const double* w, const double* g, std::size_t n, const Kernel& k,
                       const double* where, std::size_t count, double* u, double* div) {
  const double inv_var = 1.0 / k.variance();
  parallel_for(
      count,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const double x = where[i];
          double su = 0.0, sd = 0.0;
          if (div) {
            for (std::size_t j = 0; j < n; ++j) {
              const double r = x - X[j];
              const double kv = w[j] * k.value_1d(r);
              const double k1 = -r * inv_var;
              su += kv * (k1 + g[j]);
              sd += kv * ((r * r * inv_var - 1.0) * inv_var + k1 * g[j]);
            }
            div[i] = -sd;
          } else {
            for (std::size_t j = 0; j < n; ++j) {
              const double r = x - X[j];
              su += w[j] * k.value_1d(r) * (g[j] - r * inv_var);
            }
          }
          u[i] = -su;
        }
      },
      std::max<std::size_t>(1, 4096 / std::max<std::size_t>(1, n)));
}

std::vector<double> gradients(const std::vector<double>& x, const Potential& V) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = V.gradient_1d(x[i]);
  return g;
}

}  // namespace

std::vector<double> WeightedEnsemble::densities() const {
  std::vector<double> out(size());
  for (std::size_t k = 0; k < size(); ++k) out[k] = initial_densities[k] * std::exp(-log_jacobians[k]);
  return out;
}

EmpiricalMeasure WeightedEnsemble::measure() const {
  EmpiricalMeasure mu;
  mu.dimension = 1;
  mu.points = points;
  mu.weights = weights;
  return mu;
}

void WeightedEnsemble::validate() const {
  const std::size_t n = points.size();
  if (n == 0) throw InvalidInput("ensemble is empty");
  if (weights.size() != n || log_jacobians.size() != n || initial_densities.size() != n) {
    throw InvalidInput("ensemble fields have inconsistent sizes");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(weights[k] > 0.0)) throw InvalidInput("ensemble weights must be positive");
    if (!std::isfinite(points[k])) throw InvalidInput("ensemble point is not finite");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("ensemble weights do not sum to 1");
}

WeightedEnsemble make_quadrature_ensemble(const Distribution1D& law, std::size_t count) {
  if (count == 0) throw InvalidParameter("quadrature ensemble needs at least one point");
  WeightedEnsemble nu;
  nu.points = quantile_points(law, count);
  nu.weights.assign(count, 1.0 / static_cast<double>(count));
  nu.log_jacobians.assign(count, 0.0);
  nu.initial_densities.resize(count);
  for (std::size_t k = 0; k < count; ++k) nu.initial_densities[k] = law.pdf(nu.points[k]);
  return nu;
}

WeightedEnsemble make_quadrature_ensemble(const GridDensity& rho, std::size_t count) {
  if (count == 0) throw InvalidParameter("quadrature ensemble needs at least one point");
  validate_density(rho, 1e-8, std::numeric_limits<double>::infinity());
  const double h = rho.cell_width();
  const double mass = rho.mass();
  WeightedEnsemble nu;
  nu.weights.assign(count, 1.0 / static_cast<double>(count));
  nu.log_jacobians.assign(count, 0.0);
  nu.points.resize(count);
  nu.initial_densities.resize(count);
  // Piecewise-constant density per cell, so the CDF is linear inside each cell.
  std::size_t cell = 0;
  double below = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(count) * mass;
    while (cell + 1 < rho.cells() && below + rho.values[cell] * h < u) {
      below += rho.values[cell] * h;
      ++cell;
    }
    while (cell + 1 < rho.cells() && rho.values[cell] == 0.0) ++cell;
    const double left = -rho.half_width + static_cast<double>(cell) * h;
    const double frac = rho.values[cell] > 0.0 ? (u - below) / (rho.values[cell] * h) : 0.5;
    nu.points[k] = left + std::clamp(frac, 0.0, 1.0) * h;
    nu.initial_densities[k] = rho.values[cell] / mass;
  }
  return nu;
}

double VelocityField::sup_norm() const { return max_abs(values); }

VelocityField velocity_field(const GridDensity& rho, const Kernel& k, const Potential& V, VelocityModel model) {
  require_1d(k, V, "velocity_field");
  if (rho.cells() < 2) throw InvalidInput("velocity_field: grid needs at least two cells");
  const OffsetTable centres(k, rho.cells(), rho.cell_width(), 0.0, true);
  return centre_velocity(rho, centres, V, model, true);
}

VelocityField velocity_field(const WeightedEnsemble& nu, const Kernel& k, const Potential& V) {
  return velocity_field_at(nu, nu.points, k, V);
}

VelocityField velocity_field_at(const WeightedEnsemble& nu, std::span<const double> where, const Kernel& k,
                                const Potential& V) {
  require_1d(k, V, "velocity_field");
  nu.validate();
  const auto g = gradients(nu.points, V);
  VelocityField field;
  field.positions.assign(where.begin(), where.end());
  field.values.resize(where.size());
  field.divergence.resize(where.size());
  ensemble_velocity(nu.points.data(), nu.weights.data(), g.data(), nu.size(), k, where.data(), where.size(),
                    field.values.data(), field.divergence.data());
  return field;
}

double velocity_bound(const Kernel& k, const Potential& V, double pv_norm) {
  return k.sup_norm(1) +
         k.sup_norm(0) * std::pow(V.gradient_growth_constant(), 1.0 / V.assumption_index()) * pv_norm;
}

double kl_dissipation(const GridDensity& rho, const Kernel& k, const Potential& V) {
  const auto field = velocity_field(rho, k, V);
  return dissipation_from(rho, field, V);
}

GridDensity fv_step(const GridDensity& rho, const Kernel& k, const Potential& V, double dt, double cfl_limit) {
  require_1d(k, V, "fv_step");
  if (rho.cells() < 2) throw InvalidInput("fv_step: grid needs at least two cells");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("fv_step: dt must be positive");
  const double h = rho.cell_width();
  const OffsetTable faces(k, rho.cells(), h, 0.5, false);
  const auto u = face_velocities(rho, faces, V);
  const double umax = max_abs(u);
  if (dt * umax / h > cfl_limit) {
    std::ostringstream msg;
    msg << "CFL number " << dt * umax / h << " exceeds " << cfl_limit;
    throw StepRejected(msg.str(), 0.5 * cfl_limit * h / umax);
  }
  GridDensity out;
  const double outflow = upwind_update(rho, u, dt, out);
  if (outflow > 1.0) throw StepRejected("step would drive a cell negative", dt / (2.0 * outflow));
  check_boundary(out);
  return out;
}

FvTrajectory fv_solve(const GridDensity& rho0, const Kernel& k, const Potential& V, double t_final,
                      const std::vector<DensityObserver>& observers, const FvOptions& options) {
  require_1d(k, V, "fv_solve");
  validate_density(rho0);
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw InvalidParameter("fv_solve: t_final must be >= 0");
  if (!(options.cfl > 0.0) || options.cfl > 0.9) throw InvalidParameter("fv_solve: cfl must lie in (0, 0.9]");
  if (!(options.dt_max > 0.0)) throw InvalidParameter("fv_solve: dt_max must be positive");
  const std::size_t cadence = std::max<std::size_t>(1, options.cadence);

  const std::size_t m = rho0.cells();
  const double h = rho0.cell_width();
  const auto target = target_density(V, rho0.half_width, m);
  const OffsetTable faces(k, m, h, 0.5, false);
  std::optional<OffsetTable> centres;
  if (options.compute_dissipation) centres.emplace(k, m, h, 0.0, true);

  std::vector<double> stops;
  for (double c : options.checkpoints) {
    if (c > rho0.time && c < rho0.time + t_final) stops.push_back(c);
  }
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  const double t_end = rho0.time + t_final;
  stops.push_back(t_end);

  FvTrajectory traj;
  traj.max_kl_increase = -std::numeric_limits<double>::infinity();
  GridDensity rho = rho0;
  double kl = kl_grid(rho, target);

  auto observe = [&](std::size_t step, double dt) {
    PdeDiagnostics diag;
    diag.time = rho.time;
    diag.step = step;
    diag.dt = dt;
    diag.mass = rho.mass();
    diag.kl = kl;
    if (centres) diag.dissipation = dissipation_from(rho, centre_velocity(rho, *centres, V, VelocityModel::svgd, true), V);
    const auto norms = norm_monitor(rho, V);
    diag.l1_v = norms.l1_v;
    diag.w11_v = norms.w11_v;
    traj.series.push_back(diag);
    for (const auto& obs : observers) obs(rho, diag);
  };

  observe(0, 0.0);
  std::size_t step = 0;
  GridDensity next;
  for (double stop : stops) {
    const double scale = std::max(1.0, std::abs(stop));
    while (stop - rho.time > 1e-13 * scale) {
      const auto u = face_velocities(rho, faces, V);
      const double umax = max_abs(u);
      const double remaining = stop - rho.time;
      double dt = std::min(options.dt_max, remaining);
      if (umax > 0.0) dt = std::min(dt, options.cfl * h / umax);
      // Steps that would leave a sliver before the stop are stretched onto it.
      const bool lands = dt >= remaining - 1e-13 * scale;
      if (lands) dt = remaining;
      if (dt < options.dt_min) {
        std::ostringstream msg;
        msg << "time step " << dt << " fell below " << options.dt_min << " at t = " << rho.time;
        throw StepRejected(msg.str(), options.dt_min);
      }
      const double outflow = upwind_update(rho, u, dt, next);
      if (outflow > 1.0) throw StepRejected("step would drive a cell negative", dt / (2.0 * outflow));
      if (lands) next.time = stop;
      std::swap(rho, next);
      ++step;
      check_boundary(rho);
      const double kl_next = kl_grid(rho, target);
      traj.max_kl_increase = std::max(traj.max_kl_increase, kl_next - kl);
      kl = kl_next;
      if (step % cadence == 0 || lands) observe(step, dt);
    }
    if (stop != t_end) traj.checkpoint_densities.push_back(rho);
  }
  traj.steps = step;
  if (step == 0) traj.max_kl_increase = 0.0;
  traj.final_density = rho;
  return traj;
}

CharacteristicTrajectory characteristic_solve(const WeightedEnsemble& nu, const Kernel& k, const Potential& V,
                                              double t_final, const CharacteristicOptions& options) {
  require_1d(k, V, "characteristic_solve");
  nu.validate();
  if (!(options.dt > 0.0) || !std::isfinite(options.dt)) throw InvalidParameter("characteristic_solve: dt must be positive");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw InvalidParameter("characteristic_solve: t_final must be >= 0");

  const std::size_t n = nu.size();
  const std::size_t nt = options.tracers.size();
  const double t0 = nu.time;
  const double t_end = t0 + t_final;

  // State layout: [X (n), log J (n), tracers (nt)].
  std::vector<double> y(2 * n + nt);
  std::copy(nu.points.begin(), nu.points.end(), y.begin());
  std::copy(nu.log_jacobians.begin(), nu.log_jacobians.end(), y.begin() + static_cast<std::ptrdiff_t>(n));
  std::copy(options.tracers.begin(), options.tracers.end(), y.begin() + static_cast<std::ptrdiff_t>(2 * n));

  std::vector<double> g(n);
  auto rhs = [&](const std::vector<double>& s, std::vector<double>& ds) {
    ds.resize(s.size());
    for (std::size_t j = 0; j < n; ++j) g[j] = V.gradient_1d(s[j]);
    ensemble_velocity(s.data(), nu.weights.data(), g.data(), n, k, s.data(), n, ds.data(), ds.data() + n);
    if (nt > 0) {
      ensemble_velocity(s.data(), nu.weights.data(), g.data(), n, k, s.data() + 2 * n, nt, ds.data() + 2 * n,
                        nullptr);
    }
  };

  std::vector<double> stops;
  for (double c : options.checkpoints) {
    if (c < t0 || c > t_end) throw InvalidParameter("characteristic_solve: checkpoint outside [t0, t0 + t_final]");
    stops.push_back(c);
  }
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  if (stops.empty() || stops.back() != t_end) stops.push_back(t_end);

  CharacteristicTrajectory traj;
  auto record = [&](double t) {
    WeightedEnsemble snap = nu;
    std::copy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n), snap.points.begin());
    std::copy(y.begin() + static_cast<std::ptrdiff_t>(n), y.begin() + static_cast<std::ptrdiff_t>(2 * n),
              snap.log_jacobians.begin());
    snap.time = t;
    traj.snapshots.push_back(std::move(snap));
    traj.tracer_positions.emplace_back(y.begin() + static_cast<std::ptrdiff_t>(2 * n), y.end());
  };

  std::vector<double> k1, k2, k3, k4, tmp(y.size());
  double t = t0;
  for (double stop : stops) {
    const double span = stop - t;
    const auto steps = static_cast<std::size_t>(std::ceil(span / options.dt - 1e-9));
    const double dt = steps > 0 ? span / static_cast<double>(steps) : 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      rhs(y, k1);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
      rhs(tmp, k2);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
      rhs(tmp, k3);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + dt * k3[i];
      rhs(tmp, k4);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      t += dt;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i]) || std::abs(y[i]) > kBlowupRadius) {
          const std::size_t idx = i < n ? i : (i < 2 * n ? i - n : i - 2 * n);
          throw NumericalBlowup("characteristic flow left the finite region", idx, t);
        }
      }
    }
    t = stop;
    record(t);
  }
  return traj;
}

GridDensity ensemble_to_grid(const WeightedEnsemble& nu, double half_width, std::size_t cells) {
  nu.validate();
  if (!(half_width > 0.0) || cells < 2) throw InvalidParameter("ensemble_to_grid: bad grid");
  const std::size_t n = nu.size();
  if (n < 2) throw InvalidInput("ensemble_to_grid needs at least two points");
  const auto dens = nu.densities();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nu.points[a] < nu.points[b]; });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = nu.points[order[i]];
    ys[i] = dens[order[i]];
  }
  // Tails beyond the hull: exponential continuation of the two outermost samples,
  // used only when it decays.
  auto tail = [](double x0, double y0, double x1, double y1, double x) {
    if (!(y0 > 0.0) || !(y1 > 0.0) || y1 <= y0 || x1 == x0) return 0.0;
    const double slope = std::log(y1 / y0) / (x1 - x0);
    return y0 * std::exp(slope * (x - x0));
  };
  GridDensity out;
  out.half_width = half_width;
  out.time = nu.time;
  out.values.resize(cells);
  std::size_t seg = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double x = out.center(c);
    double v;
    if (x <= xs.front()) {
      v = tail(xs[0], ys[0], xs[1], ys[1], x);
    } else if (x >= xs.back()) {
      v = tail(xs[n - 1], ys[n - 1], xs[n - 2], ys[n - 2], x);
    } else {
      while (seg + 2 < n && xs[seg + 1] < x) ++seg;
      const double span = xs[seg + 1] - xs[seg];
      const double a = span > 0.0 ? (x - xs[seg]) / span : 0.5;
      v = (1.0 - a) * ys[seg] + a * ys[seg + 1];
    }
    out.values[c] = std::max(v, 0.0);
  }
  const double m = out.mass();
  if (!(m > 0.0)) throw InvalidInput("ensemble_to_grid: reconstruction has no mass on the grid");
  for (double& v : out.values) v /= m;
  return out;
}

ContractionHorizon contraction_horizon(const WeightedEnsemble& nu, const Kernel& k, const Potential& V,
                                       double radius, double factor) {
  require_1d(k, V, "contraction_horizon");
  nu.validate();
  if (!(radius > 0.0) || !(factor > 0.0)) throw InvalidParameter("contraction_horizon: radius and factor must be positive");
  ContractionHorizon out;
  out.radius = radius;
  double rmax = 0.0;
  for (double x : nu.points) rmax = std::max(rmax, std::abs(x) + radius);
  // G(R) = sup_{|y| <= R} max(|V'(y)|, |V''(y)|), tabulated as a running maximum.
  constexpr std::size_t kSamples = 8192;
  std::vector<double> G(kSamples + 1);
  double run = 0.0;
  for (std::size_t i = 0; i <= kSamples; ++i) {
    const double y = rmax * static_cast<double>(i) / static_cast<double>(kSamples);
    for (double s : {y, -y}) run = std::max({run, std::abs(V.gradient_1d(s)), std::abs(V.hessian_1d(s))});
    G[i] = run;
  }
  double pv = 0.0;
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const double x = nu.points[j];
    const double vx = V.value_1d(x);
    const double R = std::abs(x) + radius;
    const auto idx = std::min<std::size_t>(kSamples, static_cast<std::size_t>(std::ceil(R / rmax * kSamples)));
    out.c_r = std::max(out.c_r, G[idx] / (1.0 + vx));
    pv += nu.weights[j] * (1.0 + vx);
  }
  out.pv_norm = pv;
  const double k0 = k.sup_norm(0), k1 = k.sup_norm(1), k2 = k.sup_norm(2);
  out.speed_bound = k1 + out.c_r * k0 * pv;
  out.lipschitz_rate = 2.0 * k2 + 2.0 * out.c_r * (k0 + k1) * pv;
  out.horizon = std::min(radius / out.speed_bound, factor / out.lipschitz_rate);
  return out;
}

PicardResult picard_flow_map(const WeightedEnsemble& nu, const Kernel& k, const Potential& V, double horizon,
                             double tol, std::size_t max_iters, const PicardOptions& options) {
  require_1d(k, V, "picard_flow_map");
  nu.validate();
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidParameter("picard_flow_map: T0 must be positive");
  if (!(tol > 0.0)) throw InvalidParameter("picard_flow_map: tol must be positive");
  if (options.time_nodes < 2) throw InvalidParameter("picard_flow_map: need at least two time nodes");

  PicardResult result;
  result.horizon = contraction_horizon(nu, k, V, options.radius);
  if (options.enforce_horizon && horizon > result.horizon.horizon) {
    std::ostringstream msg;
    msg << "T0 = " << horizon << " exceeds the contraction horizon " << result.horizon.horizon;
    throw InvalidParameter(msg.str());
  }

  // Chebyshev-Lobatto nodes tau_i = -cos(pi i / m) and the integration matrix
  // S = W V^{-1}, W_ij = int_{-1}^{tau_i} T_j, V_ij = T_j(tau_i).
  const std::size_t m = options.time_nodes - 1;
  const std::size_t q = m + 1;
  Eigen::VectorXd tau(q);
  for (std::size_t i = 0; i < q; ++i) tau[i] = -std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(m));
  tau[0] = -1.0;
  tau[m] = 1.0;
  auto cheb = [](std::size_t j, double x) { return std::cos(static_cast<double>(j) * std::acos(std::clamp(x, -1.0, 1.0))); };
  auto cheb_integral = [&](std::size_t j, double x) {
    if (j == 0) return x + 1.0;
    if (j == 1) return 0.5 * (x * x - 1.0);
    const double a = static_cast<double>(j + 1), b = static_cast<double>(j - 1);
    const double at_x = cheb(j + 1, x) / a - cheb(j - 1, x) / b;
    const double at_m1 = (((j + 1) % 2 == 0) ? 1.0 : -1.0) / a - (((j - 1) % 2 == 0) ? 1.0 : -1.0) / b;
    return 0.5 * (at_x - at_m1);
  };
  Eigen::MatrixXd Vm(q, q), Wm(q, q);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      Vm(i, j) = cheb(j, tau[i]);
      Wm(i, j) = cheb_integral(j, tau[i]);
    }
  }
  const Eigen::MatrixXd S =
      (0.5 * horizon) * Vm.transpose().partialPivLu().solve(Wm.transpose()).transpose();

  const std::size_t n = nu.size();
  result.times.resize(q);
  for (std::size_t i = 0; i < q; ++i) result.times[i] = nu.time + 0.5 * horizon * (tau[i] + 1.0);

  std::vector<std::vector<double>> u(q, nu.points), f(q, std::vector<double>(n)), next(q, std::vector<double>(n));
  std::vector<double> g(n);
  std::size_t bad_run = 0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t j = 0; j < q; ++j) {
      for (std::size_t l = 0; l < n; ++l) g[l] = V.gradient_1d(u[j][l]);
      ensemble_velocity(u[j].data(), nu.weights.data(), g.data(), n, k, u[j].data(), n, f[j].data(), nullptr);
    }
    double dist = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t l = 0; l < n; ++l) {
        double acc = 0.0;
        for (std::size_t j = 0; j < q; ++j) acc += S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * f[j][l];
        next[i][l] = nu.points[l] + acc;
        dist = std::max(dist, std::abs(next[i][l] - u[i][l]));
      }
    }
    if (!std::isfinite(dist)) throw NumericalBlowup("Picard iterate is not finite", 0, nu.time + horizon);
    std::swap(u, next);
    if (it == 0) result.first_iterate = u;
    result.iterations = it + 1;
    if (!result.distances.empty()) {
      const double ratio = dist / result.distances.back();
      result.ratios.push_back(ratio);
      bad_run = ratio >= 1.0 ? bad_run + 1 : 0;
      if (bad_run >= 3) {
        std::ostringstream msg;
        msg << "Picard iteration does not contract on [0, " << horizon << "]";
        throw NonContraction(msg.str(), std::min(0.5 * horizon, result.horizon.horizon));
      }
    }
    result.distances.push_back(dist);
    if (dist < tol) {
      result.converged = true;
      break;
    }
  }
  if (!result.ratios.empty()) {
    double log_sum = 0.0;
    for (double r : result.ratios) log_sum += std::log(std::max(r, std::numeric_limits<double>::min()));
    result.contraction_factor = std::exp(log_sum / static_cast<double>(result.ratios.size()));
  }
  result.positions = std::move(u);
  return result;
}

StationarityResidual stationarity_residual(const GridDensity& rho, const Kernel& k, const Potential& V,
                                           VelocityModel model) {
  require_1d(k, V, "stationarity_residual");
  if (rho.cells() < 2) throw InvalidInput("stationarity_residual: grid needs at least two cells");
  const double h = rho.cell_width();
  StationarityResidual out;
  const OffsetTable centres(k, rho.cells(), h, 0.0, false);
  const auto field = centre_velocity(rho, centres, V, model, false);
  for (std::size_t i = 0; i < rho.cells(); ++i) out.flux_norm += std::abs(rho.values[i] * field.values[i]);
  out.flux_norm *= h;
  // K_{1/2} * (rho' + V' rho) = -U computed with the half factor.
  const Kernel half = half_factor(k);
  const OffsetTable half_centres(half, rho.cells(), h, 0.0, false);
  const auto r = centre_velocity(rho, half_centres, V, VelocityModel::svgd, false);
  double sq = 0.0;
  for (double v : r.values) sq += v * v;
  out.stein_residual_norm = std::sqrt(sq * h);
  return out;
}

NormMonitor norm_monitor(const GridDensity& rho, const Potential& V) {
  if (V.dimension() != 1) throw InvalidInput("norm_monitor: potential must be one-dimensional");
  const std::size_t m = rho.cells();
  if (m < 2) throw InvalidInput("norm_monitor: grid needs at least two cells");
  const double h = rho.cell_width();
  NormMonitor out;
  double grad = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = 1.0 + V.value_1d(rho.center(i));
    out.l1_v += w * rho.values[i];
    if (i + 1 < m) grad += w * std::abs(rho.values[i + 1] - rho.values[i]);
  }
  out.l1_v *= h;
  out.w11_v = out.l1_v + grad;
  return out;
}

}  // namespace steinflow
