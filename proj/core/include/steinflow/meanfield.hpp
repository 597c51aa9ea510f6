#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "steinflow/distributions.hpp"
#include "steinflow/grid.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/metrics.hpp"
#include "steinflow/potentials.hpp"

namespace steinflow {

/// Quadrature ensemble carried by the characteristic flow X(t, ., nu):
/// positions X_k(t), fixed weights w_k, log-Jacobians log dX/dx at x_k, and the
/// initial density values rho_0(x_k). One-dimensional.
struct WeightedEnsemble {
  std::vector<double> points;
  std::vector<double> weights;
  std::vector<double> log_jacobians;
  std::vector<double> initial_densities;
  double time = 0.0;

  std::size_t size() const noexcept { return points.size(); }
  /// rho_t(X_k) = rho_0(x_k) exp(-log J_k).
  std::vector<double> densities() const;
  EmpiricalMeasure measure() const;
  /// Throws InvalidInput on inconsistent sizes, non-positive weights, or
  /// weights that do not sum to 1 within 1e-12.
  void validate() const;
};

/// Equal-mass stratification of rho_0: points F^{-1}((k + 1/2)/M), weights 1/M.
WeightedEnsemble make_quadrature_ensemble(const Distribution1D& law, std::size_t count);
WeightedEnsemble make_quadrature_ensemble(const GridDensity& rho, std::size_t count);

/// Samples of U[rho](x) = -(gradK * rho)(x) - (K * (gradV rho))(x) and of its
/// divergence.
struct VelocityField {
  std::vector<double> positions;
  std::vector<double> values;
  std::vector<double> divergence;

  double sup_norm() const;
};

enum class VelocityModel {
  svgd,           ///< U = -(K' * rho) - K * (V' rho)
  mckean_vlasov,  ///< U = -(K' * rho) - V'
};

/// Velocity at the cell centres by direct summation with cell weights h.
VelocityField velocity_field(const GridDensity& rho, const Kernel& k, const Potential& V,
                             VelocityModel model = VelocityModel::svgd);
/// Velocity at the ensemble's own points.
VelocityField velocity_field(const WeightedEnsemble& nu, const Kernel& k, const Potential& V);
/// Velocity generated by the ensemble's measure, evaluated at `where`.
VelocityField velocity_field_at(const WeightedEnsemble& nu, std::span<const double> where,
                                const Kernel& k, const Potential& V);

/// ||gradK||_inf + ||K||_inf C_V^{1/q} ||rho||_{P_V}, a bound on sup |U[rho]|.
double velocity_bound(const Kernel& k, const Potential& V, double pv_norm);

/// One conservative upwind step of  d_t rho + d_x(rho U[rho]) = 0  with
/// no-flux boundaries. Face velocities are direct convolutions at the cell
/// interfaces. Throws StepRejected when dt max|U| / h > cfl_limit or when a
/// cell would lose more mass than it holds; TruncationError when the boundary
/// cells end up carrying mass >= 1e-8.
GridDensity fv_step(const GridDensity& rho, const Kernel& k, const Potential& V, double dt,
                    double cfl_limit = 0.9);

struct PdeDiagnostics {
  double time = 0.0;
  std::size_t step = 0;
  double dt = 0.0;
  double mass = 0.0;
  double kl = 0.0;
  double dissipation = 0.0;
  double l1_v = 0.0;
  double w11_v = 0.0;
};

using DensityObserver = std::function<void(const GridDensity&, const PdeDiagnostics&)>;

struct FvOptions {
  double cfl = 0.45;
  double dt_max = 0.05;
  /// Step-size floor; falling below it raises StepRejected.
  double dt_min = 1e-12;
  /// Observers fire at step 0, every `cadence` steps, at each checkpoint, and at t_final.
  std::size_t cadence = 1;
  /// Times at which the run lands exactly and observes.
  std::vector<double> checkpoints;
  bool compute_dissipation = true;
};

struct FvTrajectory {
  GridDensity final_density;
  std::vector<PdeDiagnostics> series;
  std::vector<GridDensity> checkpoint_densities;
  std::size_t steps = 0;
  /// Largest single-step increase of KL over the run (negative if KL always fell).
  double max_kl_increase = 0.0;
};

/// Repeated fv_step with dt = min(cfl h / max|U|, dt_max) up to t_final.
FvTrajectory fv_solve(const GridDensity& rho0, const Kernel& k, const Potential& V, double t_final,
                      const std::vector<DensityObserver>& observers = {}, const FvOptions& options = {});

/// KL dissipation  \int\int (rho' + V' rho)(x) K(x-y) (rho' + V' rho)(y) dx dy,
/// evaluated as h sum_k rho_k (U'_k - V'_k U_k) after integrating by parts.
double kl_dissipation(const GridDensity& rho, const Kernel& k, const Potential& V);

struct CharacteristicOptions {
  double dt = 1e-2;
  /// Passive points advected by U[mu_t] (used to differentiate the flow map).
  std::vector<double> tracers;
  /// Times (ascending, <= t_final) at which the ensemble is recorded; t_final
  /// is always recorded.
  std::vector<double> checkpoints;
};

struct CharacteristicTrajectory {
  std::vector<WeightedEnsemble> snapshots;
  std::vector<std::vector<double>> tracer_positions;
  WeightedEnsemble final_ensemble() const { return snapshots.back(); }
};

/// RK4 integration of dX_k/dt = U[mu_t](X_k), d log J_k / dt = (div U[mu_t])(X_k)
/// with mu_t = sum_k w_k delta_{X_k}. Weights stay fixed.
CharacteristicTrajectory characteristic_solve(const WeightedEnsemble& nu, const Kernel& k,
                                              const Potential& V, double t_final,
                                              const CharacteristicOptions& options = {});

/// Linear interpolation of the reconstructed density rho_t(X_k) onto a grid,
/// zero outside the ensemble hull, rescaled to unit mass.
GridDensity ensemble_to_grid(const WeightedEnsemble& nu, double half_width, std::size_t cells);

/// Constants of the contraction argument for the integral map
/// F(u)(t, x) = x + \int_0^t U[u(s)_# nu](u(s, x)) ds on paths within r of x.
struct ContractionHorizon {
  double radius = 1.0;
  /// sup over x' in supp(nu), |y| <= |x'| + r of max(|V'(y)|, |V''(y)|) / (1 + V(x')).
  double c_r = 0.0;
  double pv_norm = 0.0;
  /// ||gradK|| + C_r ||K|| ||nu||_{P_V}: bound on |F(u)(t,x) - x| / t.
  double speed_bound = 0.0;
  /// 2 ||D^2 K|| + 2 C_r (||K|| + ||gradK||) ||nu||_{P_V}: Lipschitz constant of F per unit T0.
  double lipschitz_rate = 0.0;
  /// min(r / speed_bound, factor / lipschitz_rate).
  double horizon = 0.0;
};

ContractionHorizon contraction_horizon(const WeightedEnsemble& nu, const Kernel& k, const Potential& V,
                                       double radius = 1.0, double factor = 0.5);

struct PicardOptions {
  /// Chebyshev-Lobatto time nodes on [0, T0].
  std::size_t time_nodes = 33;
  double radius = 1.0;
  /// Reject horizons above the contraction estimate.
  bool enforce_horizon = true;
};

struct PicardResult {
  std::vector<double> times;
  /// positions[i][k] = X(times[i], x_k).
  std::vector<std::vector<double>> positions;
  /// F applied once to u(t, x) = x.
  std::vector<std::vector<double>> first_iterate;
  /// sup-distances between successive iterates.
  std::vector<double> distances;
  std::vector<double> ratios;
  /// Geometric mean of the recorded ratios.
  double contraction_factor = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  ContractionHorizon horizon;
};

/// Fixed-point iteration u <- F(u) on [0, T0] with spectral (Chebyshev)
/// quadrature in time, stopped when successive iterates differ by < tol in
/// sup norm. Throws NonContraction after three consecutive distance ratios
/// >= 1, and InvalidParameter if T0 exceeds the contraction horizon (when
/// enforced).
PicardResult picard_flow_map(const WeightedEnsemble& nu, const Kernel& k, const Potential& V, double horizon,
                             double tol, std::size_t max_iters, const PicardOptions& options = {});

struct StationarityResidual {
  /// \int |rho U[rho]| dx
  double flux_norm = 0.0;
  /// || K_{1/2} * (rho' + V' rho) ||_{L^2}
  double stein_residual_norm = 0.0;
};

StationarityResidual stationarity_residual(const GridDensity& rho, const Kernel& k, const Potential& V,
                                           VelocityModel model = VelocityModel::svgd);

/// Discrete weighted norms: l1_v = \int (1+V) rho, w11_v = l1_v + \int (1+V) |rho'|
/// with forward differences.
struct NormMonitor {
  double l1_v = 0.0;
  double w11_v = 0.0;
};

NormMonitor norm_monitor(const GridDensity& rho, const Potential& V);

}  // namespace steinflow
