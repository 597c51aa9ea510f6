#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace steinflow {

/// Density on the uniform cell-centred grid of M cells covering [-L, L].
///
/// `values[k]` is the density level of cell k (centre -L + (k + 1/2) h,
/// h = 2L / M). Integrals use the cell (midpoint) rule, and the distribution
/// function is the piecewise-linear one obtained by spreading each cell's mass
/// uniformly over the cell.
struct GridDensity {
  double half_width = 0.0;
  std::vector<double> values;
  double time = 0.0;

  std::size_t cells() const noexcept { return values.size(); }
  double cell_width() const noexcept { return 2.0 * half_width / static_cast<double>(values.size()); }
  double center(std::size_t k) const noexcept {
    return -half_width + (static_cast<double>(k) + 0.5) * cell_width();
  }
  double mass() const;
  /// Larger of the two boundary-cell masses.
  double boundary_mass() const;
};

/// Samples `density` at the cell centres of an M-cell grid on [-L, L] and
/// rescales to unit mass.
GridDensity sample_density(double half_width, std::size_t cells,
                           const std::function<double(double)>& density);

/// Same grid geometry (half-width and cell count).
bool same_grid(const GridDensity& a, const GridDensity& b);

/// Checks the probability-density invariants: finite nonnegative values, unit
/// mass within `mass_tol`, and boundary-cell mass below `boundary_tol`.
/// Throws InvalidInput or TruncationError.
void validate_density(const GridDensity& rho, double mass_tol = 1e-8,
                      double boundary_tol = 1e-8);

}  // namespace steinflow
