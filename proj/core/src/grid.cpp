#include "steinflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "steinflow/error.hpp"

namespace steinflow {

double GridDensity::mass() const {
  double total = 0.0;
  for (double v : values) total += v;
  return total * cell_width();
}

double GridDensity::boundary_mass() const {
  if (values.empty()) return 0.0;
  return std::max(values.front(), values.back()) * cell_width();
}

GridDensity sample_density(double half_width, std::size_t cells,
                           const std::function<double(double)>& density) {
  if (!(half_width > 0.0) || cells < 2) {
    throw InvalidParameter("grid needs a positive half-width and at least two cells");
  }
  GridDensity rho;
  rho.half_width = half_width;
  rho.values.resize(cells);
  for (std::size_t k = 0; k < cells; ++k) rho.values[k] = density(rho.center(k));
  const double m = rho.mass();
  if (!(m > 0.0) || !std::isfinite(m)) throw InvalidInput("sampled density has no finite mass");
  for (double& v : rho.values) v /= m;
  return rho;
}

bool same_grid(const GridDensity& a, const GridDensity& b) {
  return a.cells() == b.cells() && a.half_width == b.half_width;
}

void validate_density(const GridDensity& rho, double mass_tol, double boundary_tol) {
  if (rho.cells() < 2) throw InvalidInput("grid density needs at least two cells");
  for (double v : rho.values) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("grid density has a negative or non-finite value");
  }
  if (std::abs(rho.mass() - 1.0) > mass_tol) {
    throw InvalidInput("grid density mass " + std::to_string(rho.mass()) + " is not 1");
  }
  if (rho.boundary_mass() >= boundary_tol) {
    throw TruncationError("boundary cells carry mass " + std::to_string(rho.boundary_mass()) +
                              "; enlarge the domain",
                          rho.boundary_mass());
  }
}

}  // namespace steinflow
