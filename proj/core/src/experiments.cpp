#include "steinflow/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "steinflow/error.hpp"
#include "steinflow/meanfield.hpp"
#include "steinflow/metrics.hpp"

namespace steinflow {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << fmt(v[i]);
  return out.str();
}

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

std::vector<double> sorted_times(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

GridDensity grid_of(const Distribution1D& law, double L, std::size_t cells) {
  return sample_density(L, cells, [&](double x) { return law.pdf(x); });
}

// Densities captured when an FV run lands on each requested time.
std::vector<GridDensity> fv_at(const GridDensity& rho0, const Kernel& k, const Potential& V,
                               const std::vector<double>& times) {
  std::vector<GridDensity> out(times.size());
  std::vector<bool> seen(times.size(), false);
  FvOptions opts;
  opts.checkpoints = times;
  opts.compute_dissipation = false;
  opts.cadence = std::numeric_limits<std::size_t>::max();
  DensityObserver grab = [&](const GridDensity& rho, const PdeDiagnostics& d) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!seen[i] && same_time(d.time, times[i])) {
        out[i] = rho;
        seen[i] = true;
      }
    }
  };
  fv_solve(rho0, k, V, times.back(), {grab}, opts);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!seen[i]) out[i] = rho0;  // only t = 0 can be missed
  }
  return out;
}

// Particle states at each requested time (multiples of dt).
std::vector<ParticleState> particles_at(const ParticleState& init, Dynamics dyn, const Kernel& k, const Potential& V,
                                        IntegrationScheme scheme, double dt, const std::vector<double>& times) {
  std::vector<ParticleState> out(times.size(), init);
  IntegratorSpec spec{scheme, dt, times.back()};
  IntegrateOptions opts;
  opts.compute_ksd = false;
  opts.compute_energy = false;
  Observer grab = [&](const ParticleState& s, const Diagnostics&) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (same_time(s.time, times[i])) out[i] = s;
    }
  };
  integrate(init, dyn, k, V, spec, {grab}, opts);
  return out;
}

// Ensemble whose Jacobians come from centred differences of the flow map x_k -> X_k.
WeightedEnsemble flow_map_ensemble(const WeightedEnsemble& nu, const std::vector<double>& X, double time) {
  WeightedEnsemble out = nu;
  out.points = X;
  out.time = time;
  const std::size_t n = X.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == n ? n - 1 : i + 1;
    const double J = (X[b] - X[a]) / (nu.points[b] - nu.points[a]);
    out.log_jacobians[i] = nu.log_jacobians[i] + std::log(J);
  }
  return out;
}

}  // namespace

Kernel ExperimentConfig::kernel() const { return Kernel(kernel_family, kernel_variance, potential.dimension); }

Potential ExperimentConfig::potential_function() const { return make_potential(potential); }

Distribution1D ExperimentConfig::initial_law() const {
  return Distribution1D::from_parameters(initial_family, initial_parameters);
}

void ExperimentConfig::validate() const {
  if (!(kernel_variance > 0.0)) throw InvalidParameter("kernel variance must be positive");
  if (!(half_width > 0.0) || cells < 2) throw InvalidParameter("domain needs L > 0 and at least 2 cells");
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  if (!(t_final > 0.0)) throw InvalidParameter("t_final must be positive");
  if (!(threshold > 0.0)) throw InvalidParameter("threshold must be positive");
  for (double t : times) {
    if (!(t > 0.0)) throw InvalidParameter("checkpoint times must be positive");
  }
  for (std::size_t n : particle_counts) {
    if (n == 0) throw InvalidParameter("particle counts must be positive");
  }
  if (cadence == 0) throw InvalidParameter("cadence must be at least 1");
  (void)potential_function();
  (void)initial_law();
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"mean-field", "stability",     "longtime",
                                              "hn-bound",   "mv-comparison", "crosscheck"};
  return names;
}

ExperimentConfig default_experiment_config(const std::string& id) {
  ExperimentConfig cfg;
  cfg.id = id;
  if (id == "mean-field") {
    cfg.cells = 4000;
    cfg.dt = 0.02;
    cfg.times = {0.5, 1.0, 2.0};
    cfg.t_final = 2.0;
    cfg.particle_counts = {64, 256, 1024, 4096};
    cfg.threshold = 5e-3;
  } else if (id == "stability") {
    cfg.initial_parameters = {1.0, 0.5};
    cfg.t_final = 2.0;
    cfg.dt = 0.01;
    cfg.particle_counts = {512};
    cfg.perturbations = {0.2, 0.1, 0.05, 0.025};
    cfg.threshold = 3.0;
  } else if (id == "longtime") {
    cfg.t_final = 200.0;
    cfg.cadence = 200;
    cfg.threshold = 1e-2;
  } else if (id == "hn-bound") {
    cfg.potential = {PotentialFamily::monomial, 1, {1.0, 4.0}};
    cfg.initial_parameters = {0.0, 0.3};
    cfg.dt = 5e-3;
    cfg.t_final = 5.0;
    cfg.times = {200.0};
    cfg.particle_counts = {128, 64};
    cfg.perturbations.clear();
    cfg.threshold = 1e-6;
  } else if (id == "mv-comparison") {
    cfg.quadrature_points = 800;
    cfg.t_final = 10.0;
    cfg.dt = 0.01;
    cfg.threshold = 5e-3;
  } else if (id == "crosscheck") {
    cfg.times = {0.5, 1.0, 2.0};
    cfg.t_final = 2.0;
    cfg.quadrature_points = 800;
    cfg.dt = 0.01;
    cfg.threshold = 5e-3;
  } else {
    std::string valid;
    for (const auto& n : experiment_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment '" + id + "'; valid names: " + valid);
  }
  return cfg;
}

namespace {

const std::set<std::string>& experiment_keys() {
  static const std::set<std::string> keys{
      "kernel.family",    "kernel.variance",      "potential.family", "potential.coefficients",
      "potential.dimension", "initial.family",    "initial.parameters", "domain.half_width",
      "domain.cells",     "integrator.scheme",    "integrator.dt",    "run.t_final",
      "run.times",        "run.particles",        "run.perturbations", "run.quadrature_points",
      "run.threshold",    "run.cadence",          "run.count",          "picard.tol",       "picard.max_iters",
      "seed"};
  return keys;
}

}  // namespace

ExperimentConfig experiment_config_from(const std::string& id, const Config& c) {
  c.require_known(experiment_keys());
  ExperimentConfig cfg = default_experiment_config(id);
  try {
    cfg.kernel_family = parse_kernel_family(c.get_string("kernel.family", to_string(cfg.kernel_family)));
    cfg.kernel_variance = c.get_double("kernel.variance", cfg.kernel_variance);
    if (c.has("potential.family")) {
      cfg.potential.family = parse_potential_family(c.get_string("potential.family", ""));
      if (!c.has("potential.coefficients")) {
        throw ConfigError("potential.family given without potential.coefficients");
      }
    }
    cfg.potential.coefficients = c.get_doubles("potential.coefficients", cfg.potential.coefficients);
    cfg.potential.dimension = c.get_size("potential.dimension", cfg.potential.dimension);
    cfg.initial_family = c.get_string("initial.family", cfg.initial_family);
    cfg.initial_parameters = c.get_doubles("initial.parameters", cfg.initial_parameters);
    cfg.half_width = c.get_double("domain.half_width", cfg.half_width);
    cfg.cells = c.get_size("domain.cells", cfg.cells);
    cfg.scheme = parse_scheme(c.get_string("integrator.scheme", to_string(cfg.scheme)));
    cfg.dt = c.get_double("integrator.dt", cfg.dt);
    cfg.t_final = c.get_double("run.t_final", cfg.t_final);
    cfg.times = c.get_doubles("run.times", cfg.times);
    cfg.particle_counts = c.get_sizes("run.particles", cfg.particle_counts);
    cfg.perturbations = c.get_doubles("run.perturbations", cfg.perturbations);
    cfg.quadrature_points = c.get_size("run.quadrature_points", cfg.quadrature_points);
    cfg.threshold = c.get_double("run.threshold", cfg.threshold);
    cfg.cadence = c.get_size("run.cadence", cfg.cadence);
    cfg.runs = c.get_size("run.count", cfg.runs);
    cfg.picard_tol = c.get_double("picard.tol", cfg.picard_tol);
    cfg.picard_max_iters = c.get_size("picard.max_iters", cfg.picard_max_iters);
    cfg.seed = c.get_seed("seed", cfg.seed);
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

Config to_config(const ExperimentConfig& cfg) {
  Config c;
  // Shortest text that reads back to the same double.
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  auto list = [&](const auto& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(v[i])>>) {
        out += num(v[i]);
      } else {
        out += std::to_string(v[i]);
      }
    }
    return out;
  };
  c.set("kernel.family", to_string(cfg.kernel_family));
  c.set("kernel.variance", num(cfg.kernel_variance));
  c.set("potential.family", to_string(cfg.potential.family));
  c.set("potential.coefficients", list(cfg.potential.coefficients));
  c.set("potential.dimension", std::to_string(cfg.potential.dimension));
  c.set("initial.family", cfg.initial_family);
  c.set("initial.parameters", list(cfg.initial_parameters));
  c.set("domain.half_width", num(cfg.half_width));
  c.set("domain.cells", std::to_string(cfg.cells));
  c.set("integrator.scheme", to_string(cfg.scheme));
  c.set("integrator.dt", num(cfg.dt));
  c.set("run.t_final", num(cfg.t_final));
  if (!cfg.times.empty()) c.set("run.times", list(cfg.times));
  if (!cfg.particle_counts.empty()) c.set("run.particles", list(cfg.particle_counts));
  if (!cfg.perturbations.empty()) c.set("run.perturbations", list(cfg.perturbations));
  c.set("run.quadrature_points", std::to_string(cfg.quadrature_points));
  c.set("run.threshold", num(cfg.threshold));
  c.set("run.cadence", std::to_string(cfg.cadence));
  c.set("run.count", std::to_string(cfg.runs));
  c.set("picard.tol", num(cfg.picard_tol));
  c.set("picard.max_iters", std::to_string(cfg.picard_max_iters));
  c.set("seed", std::to_string(cfg.seed));
  return c;
}

std::string Table::to_csv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  char buf[32];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

bool Report::pass() const {
  return !criteria.empty() && std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.pass; });
}

void Report::check(std::string name, bool ok, std::string detail) {
  criteria.push_back({std::move(name), ok, std::move(detail)});
}

const Table* Report::table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string Report::summary() const {
  std::ostringstream out;
  for (const auto& c : criteria) out << (c.pass ? "PASS " : "FAIL ") << id << '/' << c.name << ": " << c.detail << '\n';
  out << (pass() ? "PASS " : "FAIL ") << id << '\n';
  return out.str();
}

std::vector<std::filesystem::path> Report::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  auto put = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
    files.push_back(p);
  };
  for (const auto& t : tables) put(dir / (t.name + ".csv"), t.to_csv());
  put(dir / "summary.txt", summary());
  return files;
}

DissipationIdentity dissipation_identity(const GridDensity& rho0, const Kernel& k, const Potential& V, double dt,
                                         double t_final, double min_dissipation) {
  struct Row {
    double t, kl, d;
  };
  std::vector<Row> rows;
  FvOptions opts;
  opts.dt_max = dt;
  opts.cadence = 1;
  DensityObserver grab = [&](const GridDensity&, const PdeDiagnostics& d) { rows.push_back({d.time, d.kl, d.dissipation}); };
  const auto traj = fv_solve(rho0, k, V, t_final, {grab}, opts);
  DissipationIdentity out;
  out.max_kl_increase = traj.max_kl_increase;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double d_mid = 0.5 * (rows[i].d + rows[i + 1].d);
    if (d_mid < min_dissipation) continue;
    const double rate = -(rows[i + 1].kl - rows[i].kl) / (rows[i + 1].t - rows[i].t);
    out.max_relative_error = std::max(out.max_relative_error, std::abs(rate - d_mid) / d_mid);
    ++out.compared_steps;
  }
  return out;
}

Report exp_mean_field_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.potential.dimension != 1) throw InvalidParameter("mean-field convergence runs in one dimension");
  const auto k = cfg.kernel();
  const auto V = cfg.potential_function();
  const auto law = cfg.initial_law();
  const auto times = sorted_times(cfg.times.empty() ? std::vector<double>{cfg.t_final} : cfg.times);

  Report report;
  report.id = "mean-field";
  const GridDensity rho0 = grid_of(law, cfg.half_width, cfg.cells);
  const auto refs = fv_at(rho0, k, V, times);

  Table tab{"convergence", {"N", "t", "w1"}, {}};
  std::vector<std::vector<double>> err(times.size());
  for (std::size_t n : cfg.particle_counts) {
    const ParticleState init = quantile_initialization(law, n);
    tab.add({double(n), 0.0, wasserstein_1d(init.measure(), rho0)});
    const auto states = particles_at(init, Dynamics::svgd, k, V, cfg.scheme, cfg.dt, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double w = wasserstein_1d(states[i].measure(), refs[i]);
      err[i].push_back(w);
      tab.add({double(n), times[i], w});
    }
  }
  report.tables.push_back(tab);
  for (std::size_t i = 0; i < times.size(); ++i) {
    bool decreasing = true;
    for (std::size_t j = 1; j < err[i].size(); ++j) decreasing = decreasing && err[i][j] < err[i][j - 1];
    report.check("decreasing_t" + fmt(times[i]), decreasing, "W1 over N = " + join(err[i]));
    const double last = err[i].empty() ? std::numeric_limits<double>::infinity() : err[i].back();
    report.check("final_t" + fmt(times[i]), last < cfg.threshold,
                 "W1 at largest N = " + fmt(last) + " (threshold " + fmt(cfg.threshold) + ")");
  }
  return report;
}

Report exp_stability(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.potential.dimension != 1) throw InvalidParameter("stability study runs in one dimension");
  if (cfg.particle_counts.empty() || cfg.perturbations.empty()) {
    throw InvalidParameter("stability study needs run.particles and run.perturbations");
  }
  const auto k = cfg.kernel();
  const auto V = cfg.potential_function();
  const double p = V.conjugate_index();
  const std::size_t n = cfg.particle_counts.front();
  const ParticleState base = quantile_initialization(cfg.initial_law(), n);
  const double centre = cfg.initial_law().mean();

  IntegrateOptions opts;
  opts.compute_ksd = false;
  opts.compute_energy = false;
  opts.record_snapshots = true;
  const IntegratorSpec spec{cfg.scheme, cfg.dt, cfg.t_final};
  const auto ref = integrate(base, Dynamics::svgd, k, V, spec, {}, opts);

  Report report;
  report.id = "stability";
  Table tab{"ratios", {"epsilon", "p", "w0", "sup_w", "ratio"}, {}};
  std::vector<double> ratios;
  for (double eps : cfg.perturbations) {
    if (eps == 0.0) continue;
    // nu_2 = law of m + (1 + eps)(X - m) + eps, X ~ nu_1.
    ParticleState moved = base;
    for (double& x : moved.positions) x = centre + (1.0 + eps) * (x - centre) + eps;
    const double w0 = wasserstein_1d(base.measure(), moved.measure(), p);
    double sup_w = 0.0;
    std::size_t idx = 0;
    Observer track = [&](const ParticleState& s, const Diagnostics&) {
      sup_w = std::max(sup_w, wasserstein_1d(ref.snapshots[idx].measure(), s.measure(), p));
      ++idx;
    };
    IntegrateOptions track_opts = opts;
    track_opts.record_snapshots = false;
    integrate(moved, Dynamics::svgd, k, V, spec, {track}, track_opts);
    const double r = sup_w / w0;
    ratios.push_back(r);
    tab.add({eps, p, w0, sup_w, r});
  }
  report.tables.push_back(tab);
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  const double spread = ratios.empty() ? std::numeric_limits<double>::infinity() : *hi / *lo;
  report.check("bounded_ratio", spread < cfg.threshold,
               "r(eps) = " + join(ratios) + ", max/min = " + fmt(spread) + " (p = " + fmt(p) + ")");
  return report;
}

Report exp_longtime(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.potential.dimension != 1) throw InvalidParameter("long-time study runs in one dimension");
  const auto k = cfg.kernel();
  const auto V = cfg.potential_function();
  (void)half_factor(k);
  const auto target = target_density(V, cfg.half_width, cfg.cells);
  const GridDensity rho0 = grid_of(cfg.initial_law(), cfg.half_width, cfg.cells);

  Report report;
  report.id = "longtime";
  Table tab{"series", {"t", "kl", "dissipation", "w1", "stein_residual", "flux_norm"}, {}};
  DensityObserver rec = [&](const GridDensity& rho, const PdeDiagnostics& d) {
    const auto res = stationarity_residual(rho, k, V);
    tab.add({d.time, d.kl, d.dissipation, wasserstein_1d(rho, *target.grid), res.stein_residual_norm, res.flux_norm});
  };
  FvOptions opts;
  opts.cadence = cfg.cadence;
  const auto traj = fv_solve(rho0, k, V, cfg.t_final, {rec}, opts);
  report.tables.push_back(tab);

  const auto& last = tab.rows.back();
  report.check("kl_monotone", traj.max_kl_increase <= 1e-8,
               "largest per-step KL increase " + fmt(traj.max_kl_increase) + " over " + std::to_string(traj.steps) + " steps");
  report.check("dissipation_vanishes", last[2] < 1e-6, "dissipation at t = " + fmt(last[0]) + " is " + fmt(last[2]));
  report.check("w1_final", last[3] < cfg.threshold,
               "W1(rho_t, rho_inf) = " + fmt(last[3]) + " (threshold " + fmt(cfg.threshold) + ")");
  report.check("stein_residual", last[4] < 1e-4, "||K_1/2 * (rho' + V' rho)||_2 = " + fmt(last[4]));

  // -dKL/dt against the quadratic form on a doubled grid at dt = 1e-3.
  const GridDensity fine = grid_of(cfg.initial_law(), cfg.half_width, 2 * cfg.cells);
  const auto ident = dissipation_identity(fine, k, V, 1e-3, std::min(0.5, cfg.t_final));
  report.check("dissipation_identity", ident.compared_steps > 0 && ident.max_relative_error < 0.03,
               "max relative error " + fmt(ident.max_relative_error) + " over " +
                   std::to_string(ident.compared_steps) + " steps");
  return report;
}

Report exp_hn_bound(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto k = cfg.kernel();
  const auto V = cfg.potential_function();
  const double rate = lyapunov_growth_rate(k, V);
  const std::size_t d = cfg.potential.dimension;
  const std::size_t n_max = cfg.particle_counts.empty() ? 128 : cfg.particle_counts.front();
  const std::size_t runs = cfg.runs;

  Report report;
  report.id = "hn-bound";
  Table tab{"random_runs", {"run", "N", "mean", "stddev", "h0", "h_max", "c_fit", "max_step_rate"}, {}};

  IntegrateOptions opts;
  opts.compute_ksd = false;
  opts.compute_energy = false;
  const IntegratorSpec spec{cfg.scheme, cfg.dt, cfg.t_final};

  // Largest observed log(H_{n+1}/H_n)/dt and (log H(t) - log H(0))/t along a run.
  auto rates = [](const TrajectorySummary& tr) {
    double step_rate = -std::numeric_limits<double>::infinity();
    double fit = -std::numeric_limits<double>::infinity();
    double hmax = 0.0;
    const double h0 = tr.series.front().h_n;
    for (std::size_t i = 0; i < tr.series.size(); ++i) {
      const auto& s = tr.series[i];
      hmax = std::max(hmax, s.h_n);
      if (i > 0) {
        const auto& prev = tr.series[i - 1];
        step_rate = std::max(step_rate, std::log(s.h_n / prev.h_n) / (s.time - prev.time));
        fit = std::max(fit, std::log(s.h_n / h0) / (s.time - tr.series.front().time));
      }
    }
    return std::tuple{step_rate, fit, hmax};
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick_n(std::min<std::size_t>(16, n_max), n_max);
  std::uniform_real_distribution<double> pick_mean(-1.5, 1.5), pick_sd(0.3, 1.5);
  double worst_step = -std::numeric_limits<double>::infinity();
  double c_fit = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < runs; ++r) {
    const std::size_t n = pick_n(rng);
    const double mean = pick_mean(rng), sd = pick_sd(rng);
    const auto init = iid_initialization(Distribution1D::normal(mean, sd), n, d, cfg.seed + 1 + r);
    const auto tr = integrate(init, Dynamics::svgd, k, V, spec, {}, opts);
    const auto [step_rate, fit, hmax] = rates(tr);
    worst_step = std::max(worst_step, step_rate);
    c_fit = std::max(c_fit, fit);
    tab.add({double(r), double(n), mean, sd, tr.series.front().h_n, hmax, fit, step_rate});
  }
  report.tables.push_back(tab);
  report.check("per_step_bound", worst_step <= rate,
               "largest per-step rate " + fmt(worst_step) + " vs bound " + fmt(rate) + " over " + std::to_string(runs) + " runs");
  report.check("exponential_fit", c_fit <= rate, "fitted C = " + fmt(c_fit) + " (bound " + fmt(rate) + ")");

  const bool lemma = V.family() == PotentialFamily::monomial && V.growth_index() >= 2.0 &&
                     cfg.kernel_family == KernelFamily::gaussian;
  if (lemma) {
    const double horizon = cfg.times.empty() ? 200.0 : cfg.times.back();
    const std::size_t n = cfg.particle_counts.size() > 1 ? cfg.particle_counts[1] : 64;
    ParticleState init = d == 1 ? quantile_initialization(cfg.initial_law(), n)
                                : iid_initialization(cfg.initial_law(), n, d, cfg.seed);
    IntegrateOptions lopts = opts;
    lopts.cadence = 1;
    const auto tr = integrate(init, Dynamics::svgd, k, V, {cfg.scheme, cfg.dt, horizon}, {}, lopts);
    double head = 0.0, tail = 0.0;
    Table series{"lemma_series", {"t", "h_n"}, {}};
    const std::size_t stride = std::max<std::size_t>(1, tr.series.size() / 2000);
    for (std::size_t i = 0; i < tr.series.size(); ++i) {
      const auto& s = tr.series[i];
      (s.time <= 0.5 * horizon ? head : tail) = std::max(s.time <= 0.5 * horizon ? head : tail, s.h_n);
      if (i % stride == 0 || i + 1 == tr.series.size()) series.add({s.time, s.h_n});
    }
    const auto [step_rate, fit, hmax] = rates(tr);
    report.tables.push_back(series);
    report.check("lemma_step_bound", step_rate <= rate,
                 "largest per-step rate " + fmt(step_rate) + " vs bound " + fmt(rate));
    report.check("lemma_uniform_bound", std::isfinite(hmax) && tail <= head + cfg.threshold,
                 "max H_N on second half " + fmt(tail) + ", first half " + fmt(head) + ", t in [0, " + fmt(horizon) + "]");
  }
  return report;
}

Report exp_mv_comparison(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.potential.dimension != 1) throw InvalidParameter("McKean-Vlasov comparison runs in one dimension");
  const auto k = cfg.kernel();
  const auto V = cfg.potential_function();
  const auto target = target_density(V, cfg.half_width, cfg.cells);
  // Quadrature of rho_inf from a fine tabulation of its CDF.
  const auto fine = target_density(V, cfg.half_width, std::max<std::size_t>(cfg.cells, 20000));
  const auto nu = make_quadrature_ensemble(*fine.grid, cfg.quadrature_points);
  ParticleState init;
  init.positions = nu.points;

  Report report;
  report.id = "mv-comparison";
  Table tab{"drift", {"t", "svgd_w1_target", "mv_w1_target", "svgd_w1_initial", "mv_w1_initial"}, {}};
  const IntegratorSpec spec{cfg.scheme, cfg.dt, cfg.t_final};
  IntegrateOptions opts;
  opts.cadence = cfg.cadence;
  opts.compute_ksd = false;
  opts.compute_energy = false;
  std::vector<std::array<double, 3>> rows[2];
  for (int which = 0; which < 2; ++which) {
    Observer rec = [&](const ParticleState& s, const Diagnostics&) {
      rows[which].push_back({s.time, wasserstein_1d(s.measure(), *target.grid), wasserstein_1d(s.measure(), init.measure())});
    };
    integrate(init, which == 0 ? Dynamics::svgd : Dynamics::mckean_vlasov, k, V, spec, {rec}, opts);
  }
  double svgd = 0.0, mv = 0.0, svgd0 = 0.0, mv0 = 0.0;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    tab.add({rows[0][i][0], rows[0][i][1], rows[1][i][1], rows[0][i][2], rows[1][i][2]});
    svgd = std::max(svgd, rows[0][i][1]);
    mv = std::max(mv, rows[1][i][1]);
    svgd0 = std::max(svgd0, rows[0][i][2]);
    mv0 = std::max(mv0, rows[1][i][2]);
  }
  report.tables.push_back(tab);
  report.check("svgd_within_budget", svgd < cfg.threshold,
               "sup_t W1(mu_t, rho_inf) = " + fmt(svgd) + " (budget " + fmt(cfg.threshold) + ")");
  report.check("mv_exceeds_budget", mv >= 5.0 * cfg.threshold, "McKean-Vlasov sup_t W1(mu_t, rho_inf) = " + fmt(mv));
  report.check("mv_vs_svgd", mv >= 5.0 * svgd, "drift ratio MV/SVGD = " + fmt(mv / svgd) + "; from the initial measure " +
                                                    fmt(mv0) + " vs " + fmt(svgd0));
  return report;
}

Report exp_solver_crosscheck(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.potential.dimension != 1) throw InvalidParameter("solver cross-check runs in one dimension");
  const auto k = cfg.kernel();
  const auto V = cfg.potential_function();
  const auto times = sorted_times(cfg.times.empty() ? std::vector<double>{cfg.t_final} : cfg.times);

  std::vector<Distribution1D> panel{cfg.initial_law(), Distribution1D::normal(-1.0, 0.5), Distribution1D::normal(0.0, 1.5),
                                    Distribution1D::normal(1.0, 0.7),
                                    Distribution1D::mixture({{0.5, -1.5, 0.6}, {0.5, 1.5, 0.6}})};

  Report report;
  report.id = "crosscheck";
  Table tab{"fv_vs_characteristic", {"density", "t", "w1"}, {}};
  double worst = 0.0;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const GridDensity rho0 = grid_of(panel[i], cfg.half_width, cfg.cells);
    const auto fv = fv_at(rho0, k, V, times);
    const auto nu = make_quadrature_ensemble(panel[i], cfg.quadrature_points);
    CharacteristicOptions copts;
    copts.dt = cfg.dt;
    copts.checkpoints = times;
    const auto ch = characteristic_solve(nu, k, V, times.back(), copts);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double w = wasserstein_1d(fv[j], ensemble_to_grid(ch.snapshots[j], cfg.half_width, cfg.cells));
      worst = std::max(worst, w);
      tab.add({double(i), times[j], w});
    }
  }
  report.tables.push_back(tab);
  report.check("fv_vs_characteristic", worst < cfg.threshold,
               "max W1 over " + std::to_string(panel.size()) + " densities = " + fmt(worst) + " (threshold " + fmt(cfg.threshold) + ")");

  // Picard iteration on [0, T0] for the configured initial law.
  const auto nu = make_quadrature_ensemble(panel[0], cfg.quadrature_points);
  const auto horizon = contraction_horizon(nu, k, V);
  const double T0 = horizon.horizon;
  const auto pic = picard_flow_map(nu, k, V, T0, cfg.picard_tol, cfg.picard_max_iters);
  CharacteristicOptions copts;
  copts.dt = T0 / 200.0;
  copts.checkpoints = pic.times;
  const auto ch = characteristic_solve(nu, k, V, T0, copts);
  double sup = 0.0;
  for (std::size_t i = 0; i < pic.times.size(); ++i) {
    for (std::size_t l = 0; l < nu.size(); ++l) sup = std::max(sup, std::abs(pic.positions[i][l] - ch.snapshots[i].points[l]));
  }
  const auto fv = fv_at(grid_of(panel[0], cfg.half_width, cfg.cells), k, V, {T0});
  const auto pic_ens = flow_map_ensemble(nu, pic.positions.back(), T0);
  const double w_fv_pic = wasserstein_1d(fv[0], ensemble_to_grid(pic_ens, cfg.half_width, cfg.cells));

  Table it{"picard", {"iteration", "distance", "ratio"}, {}};
  bool contracting = pic.converged;
  for (std::size_t i = 0; i < pic.distances.size(); ++i) {
    const double r = i == 0 ? std::numeric_limits<double>::quiet_NaN() : pic.ratios[i - 1];
    if (i > 0) contracting = contracting && r < 1.0;
    it.add({double(i + 1), pic.distances[i], r});
  }
  report.tables.push_back(it);
  report.tables.push_back(Table{"horizon",
                                {"T0", "c_r", "pv_norm", "speed_bound", "lipschitz_rate"},
                                {{T0, horizon.c_r, horizon.pv_norm, horizon.speed_bound, horizon.lipschitz_rate}}});
  report.check("picard_contracts", contracting,
               std::to_string(pic.iterations) + " iterations on [0, " + fmt(T0) + "], geometric factor " +
                   fmt(pic.contraction_factor) + (pic.converged ? "" : ", not converged"));
  report.check("picard_vs_characteristic", sup <= 10.0 * cfg.picard_tol,
               "sup |X_picard - X_char| = " + fmt(sup) + " (limit " + fmt(10.0 * cfg.picard_tol) + ")");
  report.check("fv_vs_picard", w_fv_pic < cfg.threshold, "W1 at T0 = " + fmt(w_fv_pic));
  return report;
}

Report run_experiment(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "mean-field") return exp_mean_field_convergence(cfg);
  if (name == "stability") return exp_stability(cfg);
  if (name == "longtime") return exp_longtime(cfg);
  if (name == "hn-bound") return exp_hn_bound(cfg);
  if (name == "mv-comparison") return exp_mv_comparison(cfg);
  if (name == "crosscheck") return exp_solver_crosscheck(cfg);
  (void)default_experiment_config(name);  // throws with the list of valid names
  return {};
}

}  // namespace steinflow
