#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "steinflow/distributions.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/metrics.hpp"
#include "steinflow/potentials.hpp"

namespace steinflow {

/// N particles in R^d, positions stored row-major (N x d).
struct ParticleState {
  std::size_t dimension = 1;
  std::vector<double> positions;
  double time = 0.0;
  std::size_t step_count = 0;

  std::size_t size() const noexcept { return dimension == 0 ? 0 : positions.size() / dimension; }
  std::span<const double> point(std::size_t i) const noexcept {
    return {positions.data() + i * dimension, dimension};
  }
  EmpiricalMeasure measure() const { return EmpiricalMeasure::uniform(positions, dimension); }
};

enum class IntegrationScheme { explicit_euler, rk4 };
enum class Dynamics { svgd, mckean_vlasov, ula };

std::string to_string(IntegrationScheme scheme);
std::string to_string(Dynamics dynamics);
IntegrationScheme parse_scheme(const std::string& name);
Dynamics parse_dynamics(const std::string& name);

struct IntegratorSpec {
  IntegrationScheme scheme = IntegrationScheme::explicit_euler;
  double dt = 1e-2;
  double t_final = 1.0;

  /// Throws InvalidParameter unless 0 < dt <= t_final.
  void validate() const;
  /// ceil(t_final / dt) up to rounding; the last step is shortened to land on
  /// t_final exactly.
  std::size_t steps() const;
};

/// Velocity field over the whole state: writes N*d velocities into `out`.
using VelocityFn = std::function<void(const ParticleState&, std::vector<double>&)>;

/// v_i = -(1/N) sum_j gradK(x_i - x_j) - (1/N) sum_j K(x_i - x_j) gradV(x_j).
/// Each v_i is reduced over j in index order, independent of worker count.
std::vector<double> svgd_velocity(const ParticleState& state, const Kernel& k, const Potential& V);
void svgd_velocity(const ParticleState& state, const Kernel& k, const Potential& V, std::vector<double>& out);

/// v_i = -(1/N) sum_j gradK(x_i - x_j) - gradV(x_i).
std::vector<double> mckean_vlasov_velocity(const ParticleState& state, const Kernel& k, const Potential& V);
void mckean_vlasov_velocity(const ParticleState& state, const Kernel& k, const Potential& V,
                            std::vector<double>& out);

/// Euler-Maruyama step of the overdamped Langevin dynamics
///   x <- x - gradV(x) dt + sqrt(2 dt) xi.
ParticleState ula_step(const ParticleState& state, const Potential& V, double dt, std::mt19937_64& rng);

/// One step of size spec.dt. Throws NumericalBlowup when a velocity or a new
/// coordinate is non-finite or exceeds 1e8 in magnitude.
ParticleState step(const ParticleState& state, const VelocityFn& velocity, const IntegratorSpec& spec);

/// H_N(x) = (1/N) sum_i V(x_i) + 1.
double h_n(const ParticleState& state, const Potential& V);

/// E(x) = (1/N) sum_{i<j} K(x_i - x_j). Returns 0 for N < 2 (empty sum).
double interaction_energy(const ParticleState& state, const Kernel& k);

/// Q = sum_ij K(x_i - x_j) gradV(x_i).gradV(x_j), which is nonnegative by
/// positive definiteness of K, together with the magnitude scale
/// sum_ij |K(x_i - x_j)| |gradV(x_i)| |gradV(x_j)| used for its tolerance.
struct QuadraticForm {
  double value = 0.0;
  double scale = 0.0;
};
QuadraticForm potential_quadratic_form(const ParticleState& state, const Kernel& k, const Potential& V);

struct Diagnostics {
  double time = 0.0;
  std::size_t step = 0;
  double h_n = 0.0;
  double energy = 0.0;
  double ksd2 = 0.0;
  std::optional<double> w_ref;
};

using Observer = std::function<void(const ParticleState&, const Diagnostics&)>;

struct IntegrateOptions {
  /// Observers fire at step 0, every `cadence` steps, and at the final step.
  std::size_t cadence = 1;
  std::uint64_t seed = 0;
  bool compute_ksd = true;
  bool compute_energy = true;
  bool record_snapshots = false;
  /// Optional one-dimensional reference for a W_p column.
  std::optional<EmpiricalMeasure> reference;
  double reference_p = 1.0;
};

struct TrajectorySummary {
  ParticleState final_state;
  std::vector<Diagnostics> series;
  /// Observed states (when record_snapshots is set), aligned with `series`.
  std::vector<ParticleState> snapshots;
};

/// Advances `initial` to spec.t_final under the chosen dynamics. NumericalBlowup
/// propagates after observers have seen every state up to the failure.
TrajectorySummary integrate(const ParticleState& initial, Dynamics dynamics, const Kernel& k,
                            const Potential& V, const IntegratorSpec& spec,
                            const std::vector<Observer>& observers = {},
                            const IntegrateOptions& options = {});

struct DissipationReport {
  double min_form = 0.0;
  double scale_at_min = 0.0;
  double min_time = 0.0;
  std::vector<double> forms;
  bool passed = true;
};

/// Checks that the quadratic form stays >= -1e-10 * scale over every recorded
/// snapshot of an SVGD run.
DissipationReport ksd_dissipation_check(const TrajectorySummary& trajectory, const Kernel& k,
                                        const Potential& V);

/// Deterministic equal-mass stratification of a one-dimensional law.
ParticleState quantile_initialization(const Distribution1D& law, std::size_t count);

/// Seeded i.i.d. sampling, each coordinate drawn from `law`.
ParticleState iid_initialization(const Distribution1D& law, std::size_t count, std::size_t dimension,
                                 std::uint64_t seed);

/// Rate C = ||gradK||_inf * C_V^{1/q} in d/dt H_N <= C H_N, from
/// |gradV| <= (C_V (1 + V))^{1/q} <= C_V^{1/q} (1 + V). The same constant
/// bounds the growth of ||rho_t||_{P_V} for the mean-field equation.
double lyapunov_growth_rate(const Kernel& k, const Potential& V);

}  // namespace steinflow
