#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "steinflow/error.hpp"
#include "steinflow/experiments.hpp"
#include "steinflow/meanfield.hpp"
#include "steinflow/metrics.hpp"
#include "steinflow/particles.hpp"
#include "steinflow/potentials.hpp"

#ifndef STEINFLOW_VERSION_STRING
#define STEINFLOW_VERSION_STRING "unknown"
#endif

namespace steinflow::cli {
namespace {

namespace fs = std::filesystem;

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Collects output files relative to the run directory and writes the manifest last.
class RunWriter {
 public:
  RunWriter(fs::path dir, std::string command, const Config& cfg)
      : dir_(std::move(dir)), command_(std::move(command)), cfg_(cfg), started_(utc_now()) {
    fs::create_directories(dir_);
  }

  std::ofstream open(const fs::path& rel) {
    const fs::path p = dir_ / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    files_.push_back(rel.generic_string());
    return out;
  }

  void record(const fs::path& abs) { files_.push_back(fs::relative(abs, dir_).generic_string()); }

  void finish(const std::string& status) {
    nlohmann::json m;
    m["command"] = command_;
    m["version"] = STEINFLOW_VERSION_STRING;
    m["config"] = cfg_.entries();
    m["seed"] = cfg_.get_seed("seed", 0);
    m["started"] = started_;
    m["finished"] = utc_now();
    m["status"] = status;
    m["outputs"] = files_;
    const fs::path tmp = dir_ / "manifest.json.tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error("cannot write " + tmp.string());
      out << m.dump(2) << '\n';
    }
    fs::rename(tmp, dir_ / "manifest.json");
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::string command_;
  Config cfg_;
  std::string started_;
  std::vector<std::string> files_;
};

const std::set<std::string>& common_keys() {
  static const std::set<std::string> keys{"kernel.family",       "kernel.variance", "potential.family",
                                          "potential.coefficients", "potential.dimension", "initial.family",
                                          "initial.parameters",  "run.t_final",     "integrator.dt",
                                          "output.cadence",      "seed"};
  return keys;
}

std::set<std::string> with_common(std::initializer_list<std::string> extra) {
  std::set<std::string> keys = common_keys();
  keys.insert(extra.begin(), extra.end());
  return keys;
}

PotentialSpec potential_spec(const Config& cfg) {
  PotentialSpec spec;
  spec.family = parse_potential_family(cfg.get_string("potential.family", "quadratic"));
  spec.dimension = cfg.get_size("potential.dimension", 1);
  spec.coefficients = cfg.get_doubles("potential.coefficients", {1.0});
  return spec;
}

Kernel kernel_of(const Config& cfg, std::size_t dim) {
  return Kernel(parse_kernel_family(cfg.get_string("kernel.family", "gaussian")), cfg.get_double("kernel.variance", 2.0),
                dim);
}

Distribution1D initial_of(const Config& cfg) {
  return Distribution1D::from_parameters(cfg.get_string("initial.family", "normal"),
                                         cfg.get_doubles("initial.parameters", {0.0, 1.0}));
}

std::string stamp(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

void write_density(RunWriter& w, const fs::path& rel, const GridDensity& rho) {
  auto out = w.open(rel);
  out << "x,value\n";
  for (std::size_t i = 0; i < rho.cells(); ++i) out << g17(rho.center(i)) << ',' << g17(rho.values[i]) << '\n';
}

// Runs `body` and maps library errors onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InvalidParameter& e) {
    err << "invalid parameter: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalBlowup& e) {
    err << "numerical failure: " << e.what() << " (particle " << e.particle() << ", t = " << e.time() << ")\n";
    return kNumerical;
  } catch (const StepRejected& e) {
    err << "numerical failure: " << e.what() << " (suggested dt " << e.suggested_dt() << ")\n";
    return kNumerical;
  } catch (const TruncationError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const NonContraction& e) {
    err << "numerical failure: " << e.what() << " (suggested horizon " << e.suggested_horizon() << ")\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace

Config resolve_config(const RunOptions& opts) {
  Config cfg = opts.config ? Config::load(*opts.config) : Config{};
  for (const auto& o : opts.overrides) cfg.apply_override(o);
  if (opts.seed) cfg.set("seed", std::to_string(*opts.seed));
  return cfg;
}

int cmd_simulate(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Config cfg = resolve_config(opts);
    cfg.require_known(with_common({"dynamics", "particles.count", "initial.placement", "integrator.scheme",
                                   "output.snapshot_every", "diagnostics.ksd", "diagnostics.energy",
                                   "diagnostics.w_ref"}));
    const Dynamics dyn = parse_dynamics(cfg.get_string("dynamics", "svgd"));
    const Potential V = make_potential(potential_spec(cfg));
    const std::size_t d = V.dimension();
    const Kernel k = kernel_of(cfg, d);
    const std::size_t n = cfg.get_size("particles.count", 64);
    const std::uint64_t seed = cfg.get_seed("seed", 0);
    const auto law = initial_of(cfg);
    const std::string placement = cfg.get_string("initial.placement", d == 1 ? "quantile" : "iid");
    ParticleState init;
    if (placement == "quantile") {
      if (d != 1) throw ConfigError("initial.placement = quantile needs potential.dimension = 1");
      init = quantile_initialization(law, n);
    } else if (placement == "iid") {
      init = iid_initialization(law, n, d, seed);
    } else {
      throw ConfigError("initial.placement must be quantile or iid, got '" + placement + "'");
    }
    IntegratorSpec spec;
    spec.scheme = parse_scheme(cfg.get_string("integrator.scheme", "euler"));
    spec.dt = cfg.get_double("integrator.dt", 1e-2);
    spec.t_final = cfg.get_double("run.t_final", 1.0);
    spec.validate();

    IntegrateOptions io;
    io.cadence = cfg.get_size("output.cadence", 1);
    io.seed = seed;
    io.compute_ksd = cfg.get_bool("diagnostics.ksd", true);
    io.compute_energy = cfg.get_bool("diagnostics.energy", true);
    const bool w_ref = cfg.get_bool("diagnostics.w_ref", false);
    if (w_ref) {
      if (d != 1) throw ConfigError("diagnostics.w_ref needs potential.dimension = 1");
      const auto target = target_density(V, 10.0 + 10.0 * std::sqrt(k.variance()), 20000);
      io.reference = EmpiricalMeasure::uniform(make_quadrature_ensemble(*target.grid, 2000).points);
    }
    const std::size_t snap_every = cfg.get_size("output.snapshot_every", 0);
    if (io.cadence == 0) throw ConfigError("output.cadence must be at least 1");

    RunWriter writer(opts.out, "simulate", cfg);
    auto diag = writer.open("diagnostics.csv");
    diag << "t,H_N,E,KSD2" << (w_ref ? ",W_ref" : "") << '\n';
    const std::size_t steps = spec.steps();
    auto snapshot = [&](const ParticleState& s) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshots/step_%08zu.csv", s.step_count);
      auto f = writer.open(name);
      for (std::size_t a = 0; a < d; ++a) f << (a ? "," : "") << 'x' << a;
      f << '\n';
      for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t a = 0; a < d; ++a) f << (a ? "," : "") << g17(s.positions[i * d + a]);
        f << '\n';
      }
    };
    Observer obs = [&](const ParticleState& s, const Diagnostics& dg) {
      diag << g17(dg.time) << ',' << g17(dg.h_n) << ',' << g17(dg.energy) << ',' << g17(dg.ksd2);
      if (w_ref) diag << ',' << g17(dg.w_ref.value_or(0.0));
      diag << '\n';
      const bool edge = s.step_count == 0 || s.step_count == steps;
      if (edge || (snap_every > 0 && s.step_count % snap_every == 0)) snapshot(s);
    };
    const auto summary = integrate(init, dyn, k, V, spec, {obs}, io);
    diag.close();
    writer.finish("ok");
    out << "simulate: " << summary.series.size() << " diagnostic rows, H_N(T) = " << summary.series.back().h_n
        << ", output in " << writer.dir().string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_pde(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Config cfg = resolve_config(opts);
    cfg.require_known(with_common({"solver", "domain.half_width", "domain.cells", "fv.cfl", "fv.dt_max",
                                   "characteristic.points", "output.snapshot_times"}));
    const std::string solver = cfg.get_string("solver", "");
    if (solver.empty()) throw ConfigError("missing required key 'solver' (fv or characteristic)");
    const Potential V = make_potential(potential_spec(cfg));
    if (V.dimension() != 1) throw ConfigError("pde runs need potential.dimension = 1");
    const Kernel k = kernel_of(cfg, 1);
    const auto law = initial_of(cfg);
    const double L = cfg.get_double("domain.half_width", 10.0);
    const std::size_t M = cfg.get_size("domain.cells", 1000);
    const double t_final = cfg.get_double("run.t_final", 1.0);
    const std::size_t cadence = cfg.get_size("output.cadence", 1);
    if (cadence == 0) throw ConfigError("output.cadence must be at least 1");
    const auto snap_times = cfg.get_doubles("output.snapshot_times", {});
    const GridDensity rho0 = sample_density(L, M, [&](double x) { return law.pdf(x); });
    validate_density(rho0);

    RunWriter writer(opts.out, "pde", cfg);
    auto diag = writer.open("diagnostics.csv");
    diag << "t,mass,KL,dissipation,l1_v,w11_v\n";
    auto row = [&](const PdeDiagnostics& d) {
      diag << g17(d.time) << ',' << g17(d.mass) << ',' << g17(d.kl) << ',' << g17(d.dissipation) << ','
           << g17(d.l1_v) << ',' << g17(d.w11_v) << '\n';
    };
    std::size_t rows = 0;
    if (solver == "fv") {
      FvOptions fo;
      fo.cfl = cfg.get_double("fv.cfl", 0.45);
      fo.dt_max = cfg.get_double("fv.dt_max", 0.05);
      fo.cadence = cadence;
      fo.checkpoints = snap_times;
      write_density(writer, "densities/t_" + stamp(0.0) + ".csv", rho0);
      DensityObserver obs = [&](const GridDensity& rho, const PdeDiagnostics& d) {
        row(d);
        ++rows;
        for (double t : snap_times) {
          if (std::abs(d.time - t) <= 1e-12 * std::max(1.0, t)) write_density(writer, "densities/t_" + stamp(t) + ".csv", rho);
        }
      };
      const auto traj = fv_solve(rho0, k, V, t_final, {obs}, fo);
      write_density(writer, "densities/t_" + stamp(traj.final_density.time) + ".csv", traj.final_density);
      out << "pde/fv: " << traj.steps << " steps, KL(T) = " << traj.series.back().kl;
    } else if (solver == "characteristic") {
      const double dt = cfg.get_double("integrator.dt", 1e-2);
      const auto nu = make_quadrature_ensemble(law, cfg.get_size("characteristic.points", 800));
      CharacteristicOptions co;
      co.dt = dt;
      const double every = dt * static_cast<double>(cadence);
      for (std::size_t i = 1; static_cast<double>(i) * every < t_final - 1e-12; ++i) {
        co.checkpoints.push_back(static_cast<double>(i) * every);
      }
      for (double t : snap_times) {
        if (t > 0.0 && t <= t_final) co.checkpoints.push_back(t);
      }
      const auto traj = characteristic_solve(nu, k, V, t_final, co);
      const auto target = target_density(V, L, M);
      std::vector<WeightedEnsemble> all{nu};
      all.insert(all.end(), traj.snapshots.begin(), traj.snapshots.end());
      for (const auto& e : all) {
        const GridDensity rho = ensemble_to_grid(e, L, M);
        PdeDiagnostics d;
        d.time = e.time;
        d.mass = rho.mass();
        d.kl = kl_grid(rho, target);
        d.dissipation = kl_dissipation(rho, k, V);
        const auto nm = norm_monitor(rho, V);
        d.l1_v = nm.l1_v;
        d.w11_v = nm.w11_v;
        row(d);
        ++rows;
        bool snap = e.time == 0.0 || e.time == all.back().time;
        for (double t : snap_times) snap = snap || std::abs(e.time - t) <= 1e-12 * std::max(1.0, t);
        if (snap) {
          auto f = writer.open("ensembles/t_" + stamp(e.time) + ".csv");
          f << "x0,X,weight,log_jacobian,density\n";
          const auto dens = e.densities();
          for (std::size_t i = 0; i < e.size(); ++i) {
            f << g17(nu.points[i]) << ',' << g17(e.points[i]) << ',' << g17(e.weights[i]) << ','
              << g17(e.log_jacobians[i]) << ',' << g17(dens[i]) << '\n';
          }
          write_density(writer, "densities/t_" + stamp(e.time) + ".csv", rho);
        }
      }
      out << "pde/characteristic: " << nu.size() << " points";
    } else {
      throw ConfigError("solver must be fv or characteristic, got '" + solver + "'");
    }
    diag.close();
    writer.finish("ok");
    out << ", " << rows << " diagnostic rows, output in " << writer.dir().string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_experiment(const std::string& name, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      std::string valid;
      for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
      throw ConfigError("unknown experiment '" + name + "'; valid names: " + valid);
    }
    const Config raw = resolve_config(opts);
    const ExperimentConfig ec = experiment_config_from(name, raw);
    RunWriter writer(opts.out, "experiment " + name, to_config(ec));
    const Report report = run_experiment(name, ec);
    for (const auto& p : report.write(writer.dir())) writer.record(p);
    writer.finish(report.pass() ? "pass" : "fail");
    out << report.summary();
    for (const auto& c : report.criteria) {
      if (!c.pass) err << "FAIL " << report.id << '/' << c.name << ": " << c.detail << '\n';
    }
    return static_cast<int>(report.pass() ? kOk : kFail);
  });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stein variational gradient flow simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", STEINFLOW_VERSION_STRING);

  RunOptions opts;
  std::string experiment;
  std::uint64_t seed = 0;
  std::string config, outdir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Configuration file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed (overrides the config)");
    sub->add_option("--out", outdir, "Output directory");
    sub->add_option("--override", opts.overrides, "Config override key=value (repeatable)");
  };
  auto* simulate = app.add_subcommand("simulate", "Integrate a particle system");
  add_common(simulate);
  auto* pde = app.add_subcommand("pde", "Solve the mean-field equation on a grid");
  add_common(pde);
  auto* exp = app.add_subcommand("experiment", "Run a validation study");
  exp->add_option("name", experiment, "One of: mean-field, stability, longtime, hn-bound, mv-comparison, crosscheck")
      ->required();
  add_common(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::ostringstream help;
      app.exit(e, help, help);
      out << help.str();
      return kOk;
    }
    std::ostringstream msg;
    app.exit(e, msg, msg);
    err << msg.str();
    return kConfig;
  }
  if (!config.empty()) opts.config = config;
  if (!outdir.empty()) opts.out = outdir;
  for (auto* sub : {simulate, pde, exp}) {
    if (sub->parsed() && sub->count("--seed") > 0) opts.seed = seed;
  }
  if (simulate->parsed()) return cmd_simulate(opts, out, err);
  if (pde->parsed()) return cmd_pde(opts, out, err);
  return cmd_experiment(experiment, opts, out, err);
}

}  // namespace steinflow::cli
