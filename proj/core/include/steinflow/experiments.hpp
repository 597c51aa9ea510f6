#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "steinflow/config.hpp"
#include "steinflow/distributions.hpp"
#include "steinflow/grid.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/particles.hpp"
#include "steinflow/potentials.hpp"

namespace steinflow {

/// Shared settings of the validation studies. Defaults depend on the
/// experiment id; see default_experiment_config.
struct ExperimentConfig {
  std::string id;
  KernelFamily kernel_family = KernelFamily::gaussian;
  double kernel_variance = 2.0;
  PotentialSpec potential{PotentialFamily::quadratic, 1, {1.0}};
  std::string initial_family = "normal";
  std::vector<double> initial_parameters{2.0, 1.0};
  double half_width = 10.0;
  std::size_t cells = 1000;
  IntegrationScheme scheme = IntegrationScheme::rk4;
  double dt = 1e-2;
  double t_final = 1.0;
  std::vector<double> times;
  std::vector<std::size_t> particle_counts;
  std::vector<double> perturbations;
  std::size_t quadrature_points = 800;
  double threshold = 5e-3;
  double picard_tol = 1e-10;
  std::size_t picard_max_iters = 200;
  std::size_t cadence = 1;
  /// Independent randomized runs (H_N study).
  std::size_t runs = 20;
  std::uint64_t seed = 0;

  Kernel kernel() const;
  Potential potential_function() const;
  Distribution1D initial_law() const;
  /// Throws InvalidParameter on inconsistent settings.
  void validate() const;
};

/// Names accepted by run_experiment.
const std::vector<std::string>& experiment_names();

ExperimentConfig default_experiment_config(const std::string& id);

/// Overlays recognised keys from `cfg` on the defaults for `id`; unknown keys
/// raise ConfigError.
ExperimentConfig experiment_config_from(const std::string& id, const Config& cfg);

/// Round-trips an ExperimentConfig to the flat key/value form.
Config to_config(const ExperimentConfig& cfg);

struct Criterion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
  std::string to_csv() const;
};

struct Report {
  std::string id;
  std::vector<Criterion> criteria;
  std::vector<Table> tables;

  bool pass() const;
  void check(std::string name, bool ok, std::string detail);
  const Table* table(const std::string& name) const;
  /// One "PASS name: detail" / "FAIL name: detail" line per criterion.
  std::string summary() const;
  /// Writes <name>.csv per table and summary.txt; returns the files written.
  std::vector<std::filesystem::path> write(const std::filesystem::path& dir) const;
};

/// W1(mu^N_t, rho_t^FV) over a sweep of N with quantile initial data.
Report exp_mean_field_convergence(const ExperimentConfig& cfg);
/// sup_t W_p(mu_1t, mu_2t) / W_p(nu_1, nu_2) over shifted initial data, p the
/// conjugate index of the potential.
Report exp_stability(const ExperimentConfig& cfg);
/// KL, dissipation, W1 to rho_inf and the half-kernel residual along a long FV run.
Report exp_longtime(const ExperimentConfig& cfg);
/// Exponential H_N bound on random SVGD runs plus the uniform bound for V = m|x|^p.
Report exp_hn_bound(const ExperimentConfig& cfg);
/// SVGD vs McKean-Vlasov particles started at the quadrature of rho_inf.
Report exp_mv_comparison(const ExperimentConfig& cfg);
/// FV vs characteristic flow vs Picard iteration.
Report exp_solver_crosscheck(const ExperimentConfig& cfg);

/// Dispatch by name; throws ConfigError listing valid names for unknown ones.
Report run_experiment(const std::string& name, const ExperimentConfig& cfg);

/// Compares -dKL/dt (finite differences of an FV run at fixed dt) with the
/// dissipation quadratic form, averaged over each step's endpoints.
struct DissipationIdentity {
  double max_relative_error = 0.0;
  std::size_t compared_steps = 0;
  double max_kl_increase = 0.0;
};

DissipationIdentity dissipation_identity(const GridDensity& rho0, const Kernel& k, const Potential& V, double dt,
                                         double t_final, double min_dissipation = 1e-3);

}  // namespace steinflow
