#include "steinflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "steinflow/error.hpp"
#include "steinflow/parallel.hpp"

namespace steinflow {
namespace {

// Piece of a quantile function: over a u-interval of length `mass` the
// quantile runs linearly from `lo` to `hi` (lo == hi for an atom).
struct QuantilePiece {
  double mass;
  double lo;
  double hi;
};

std::vector<QuantilePiece> pieces_of(const EmpiricalMeasure& mu) {
  if (mu.dimension != 1) throw InvalidInput("wasserstein_1d needs one-dimensional measures");
  mu.validate();
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return mu.points[i] < mu.points[j]; });
  std::vector<QuantilePiece> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back({mu.weight(i), mu.points[i], mu.points[i]});
  return out;
}

std::vector<QuantilePiece> pieces_of(const GridDensity& rho) {
  const double h = rho.cell_width();
  std::vector<QuantilePiece> out;
  out.reserve(rho.cells());
  for (std::size_t k = 0; k < rho.cells(); ++k) {
    if (rho.values[k] < 0.0) throw InvalidInput("wasserstein_1d: negative density value");
    if (rho.values[k] == 0.0) continue;
    const double left = rho.center(k) - 0.5 * h;
    out.push_back({rho.values[k] * h, left, left + h});
  }
  return out;
}

void normalise(std::vector<QuantilePiece>& pieces) {
  double total = 0.0;
  for (const auto& q : pieces) total += q.mass;
  if (!(total > 0.0)) throw InvalidInput("wasserstein_1d: measure has no mass");
  for (auto& q : pieces) q.mass /= total;
}

// \int_0^len |d0 + (d1 - d0) t / len|^p dt for a difference that keeps its sign.
double same_sign_integral(double a, double b, double len, double p) {
  a = std::abs(a);
  b = std::abs(b);
  if (p == 1.0) return 0.5 * len * (a + b);
  const double hi = std::max(a, b);
  if (hi == 0.0) return 0.0;
  if (std::abs(b - a) <= 1e-7 * hi) return len * std::pow(0.5 * (a + b), p);
  return len * (std::pow(b, p + 1.0) - std::pow(a, p + 1.0)) / ((p + 1.0) * (b - a));
}

double linear_power_integral(double d0, double d1, double len, double p) {
  if (len <= 0.0) return 0.0;
  if ((d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0)) {
    const double t = d0 / (d0 - d1);
    return same_sign_integral(d0, 0.0, t * len, p) + same_sign_integral(0.0, d1, (1.0 - t) * len, p);
  }
  return same_sign_integral(d0, d1, len, p);
}

double wasserstein_pieces(std::vector<QuantilePiece> a, std::vector<QuantilePiece> b, double p) {
  if (!(p >= 1.0)) throw InvalidParameter("Wasserstein order p must be >= 1");
  normalise(a);
  normalise(b);
  double total = 0.0;
  std::size_t ia = 0, ib = 0;
  double used_a = 0.0, used_b = 0.0;  // mass already consumed inside the current pieces
  while (ia < a.size() && ib < b.size()) {
    const QuantilePiece& pa = a[ia];
    const QuantilePiece& pb = b[ib];
    const double left_a = pa.mass - used_a;
    const double left_b = pb.mass - used_b;
    const double len = std::min(left_a, left_b);
    auto at = [](const QuantilePiece& q, double used) {
      return q.lo + (q.hi - q.lo) * (q.mass > 0.0 ? used / q.mass : 0.0);
    };
    const double d0 = at(pa, used_a) - at(pb, used_b);
    const double d1 = at(pa, used_a + len) - at(pb, used_b + len);
    total += linear_power_integral(d0, d1, len, p);
    used_a += len;
    used_b += len;
    if (left_a <= left_b) {
      ++ia;
      used_a = 0.0;
    }
    if (left_b <= left_a) {
      ++ib;
      used_b = 0.0;
    }
  }
  return std::pow(std::max(total, 0.0), 1.0 / p);
}

double sorted_pairing(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  std::vector<double> x = a.points, y = b.points;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::pow(std::abs(x[i] - y[i]), p);
  return std::pow(total / static_cast<double>(x.size()), 1.0 / p);
}

}  // namespace

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<double> points, std::size_t dimension) {
  EmpiricalMeasure mu;
  mu.dimension = dimension;
  mu.points = std::move(points);
  mu.validate();
  return mu;
}

void EmpiricalMeasure::validate() const {
  if (dimension == 0 || points.empty() || points.size() % dimension != 0) {
    throw InvalidInput("empirical measure: point buffer is not a non-empty multiple of the dimension");
  }
  if (weights.empty()) return;
  if (weights.size() != size()) throw InvalidInput("empirical measure: one weight per point required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw InvalidInput("empirical measure: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("empirical measure: weights must sum to 1");
}

double wasserstein_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  if (a.dimension != 1 || b.dimension != 1) throw InvalidInput("wasserstein_1d needs one-dimensional measures; use wasserstein_exact_small");
  if (!(p >= 1.0)) throw InvalidParameter("Wasserstein order p must be >= 1");
  if (a.is_uniform() && b.is_uniform() && a.size() == b.size()) {
    a.validate();
    b.validate();
    return sorted_pairing(a, b, p);
  }
  return wasserstein_pieces(pieces_of(a), pieces_of(b), p);
}

double wasserstein_1d(const GridDensity& a, const GridDensity& b, double p) {
  return wasserstein_pieces(pieces_of(a), pieces_of(b), p);
}

double wasserstein_1d(const EmpiricalMeasure& a, const GridDensity& b, double p) {
  return wasserstein_pieces(pieces_of(a), pieces_of(b), p);
}

double wasserstein_1d(const GridDensity& a, const EmpiricalMeasure& b, double p) {
  return wasserstein_pieces(pieces_of(a), pieces_of(b), p);
}

double wasserstein_exact_small(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  a.validate();
  b.validate();
  if (a.dimension != b.dimension) throw InvalidInput("wasserstein_exact_small: dimension mismatch");
  if (a.size() != b.size() || a.size() > 8) throw InvalidInput("wasserstein_exact_small: needs equal sizes n <= 8");
  if (!a.is_uniform() || !b.is_uniform()) throw InvalidInput("wasserstein_exact_small: needs uniform weights");
  if (!(p >= 1.0)) throw InvalidParameter("Wasserstein order p must be >= 1");

  const std::size_t n = a.size();
  const std::size_t d = a.dimension;
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double r2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = a.points[i * d + c] - b.points[j * d + c];
        r2 += diff * diff;
      }
      cost[i * n + j] = std::pow(std::sqrt(r2), p);
    }
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::pow(best / static_cast<double>(n), 1.0 / p);
}

double kl_grid(const GridDensity& rho, const TargetDensity& target) {
  if (!target.grid || !same_grid(rho, *target.grid)) {
    throw InvalidInput("kl_grid: density and target live on different grids");
  }
  const auto& ref = target.grid->values;
  double total = 0.0;
  for (std::size_t k = 0; k < rho.cells(); ++k) {
    const double r = rho.values[k];
    if (r > 0.0) total += r * std::log(r / ref[k]);
  }
  return total * rho.cell_width();
}

double stein_kernel(std::span<const double> x, std::span<const double> y, const Kernel& k,
                    const Potential& V) {
  const std::size_t d = x.size();
  std::vector<double> gx(d), gy(d), diff(d), gk(d);
  V.value_and_gradient(x, gx);
  V.value_and_gradient(y, gy);
  for (std::size_t a = 0; a < d; ++a) diff[a] = x[a] - y[a];
  const double kv = k.value_and_gradient(diff, gk);
  double out = -k.laplacian(diff);
  for (std::size_t a = 0; a < d; ++a) out += gx[a] * gy[a] * kv + (gx[a] - gy[a]) * gk[a];
  return out;
}

double ksd(const EmpiricalMeasure& mu, const Kernel& k, const Potential& V) {
  mu.validate();
  if (mu.dimension != k.dimension() || mu.dimension != V.dimension()) {
    throw InvalidInput("ksd: kernel, potential and measure dimensions differ");
  }
  const std::size_t n = mu.size();
  const std::size_t d = mu.dimension;
  std::vector<double> grads(n * d);
  for (std::size_t i = 0; i < n; ++i) V.value_and_gradient(mu.point(i), {grads.data() + i * d, d});

  // Row-wise partial sums over j > i, combined in index order afterwards.
  std::vector<double> rows(n, 0.0);
  const double self = -k.laplacian(std::vector<double>(d, 0.0));
  const double inv = 1.0 / k.variance();
  if (d == 1) {
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double xi = mu.points[i], gi = grads[i];
      double acc = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double r = xi - mu.points[j];
        const double kv = k.value_1d(r);
        const double u = gi * grads[j] * kv + (gi - grads[j]) * (-r * inv * kv) -
                         (r * r * inv - 1.0) * inv * kv;
        acc += mu.weight(j) * u;
      }
      rows[i] = mu.weight(i) * (2.0 * acc + mu.weight(i) * (self + gi * gi * k.peak()));
    }
    }, 16);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) acc += mu.weight(j) * stein_kernel(mu.point(i), mu.point(j), k, V);
      double g2 = 0.0;
      for (std::size_t a = 0; a < d; ++a) g2 += grads[i * d + a] * grads[i * d + a];
      rows[i] = mu.weight(i) * (2.0 * acc + mu.weight(i) * (self + g2 * k.peak()));
    }
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

double moment_norm(const EmpiricalMeasure& mu, const Potential& V, MomentNorm mode, double p) {
  mu.validate();
  if (mode == MomentNorm::pp && !(p >= 1.0)) throw InvalidParameter("moment order p must be >= 1");
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto x = mu.point(i);
    if (mode == MomentNorm::pv) {
      total += mu.weight(i) * (1.0 + V.value(x));
    } else {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      total += mu.weight(i) * std::pow(std::sqrt(r2), p);
    }
  }
  return total;
}

double moment_norm(const GridDensity& rho, const Potential& V, MomentNorm mode, double p) {
  if (mode == MomentNorm::pp && !(p >= 1.0)) throw InvalidParameter("moment order p must be >= 1");
  if (V.dimension() != 1) throw InvalidInput("moment_norm: grid densities are one-dimensional");
  double total = 0.0;
  for (std::size_t k = 0; k < rho.cells(); ++k) {
    const double x = rho.center(k);
    const double f = mode == MomentNorm::pv ? 1.0 + V.value_1d(x) : std::pow(std::abs(x), p);
    total += f * rho.values[k];
  }
  return total * rho.cell_width();
}

}  // namespace steinflow
