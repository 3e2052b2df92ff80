#pragma once

// Path functionals on grids: supremum, sojourn time above a level (right
// endpoint cell rule), horizon rescaling and the excess integral.

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "ssx/error.hpp"
#include "ssx/stats.hpp"

namespace ssx {

inline double path_sup(std::span<const double> path) {
  if (path.empty()) throw ShapeError("path_sup: empty path");
  return *std::max_element(path.begin(), path.end());
}

struct SojournSample {
  double L = 0.0;
  double u = 0.0;
  std::size_t r = 1;
  double normalized = 0.0;  // L / q
};

/// Time in (0, s] spent above u: cell (t_{j-1}, t_j] counts its length when
/// path(t_j) > u; the first grid point has no cell.  A cell straddling s
/// counts the part up to s with the indicator at its right endpoint.
inline double sojourn_time(std::span<const double> path, std::span<const double> times, double u,
                           double s = 1.0) {
  if (path.size() != times.size()) throw ShapeError("sojourn: path and grid differ in length");
  detail::require(s > 0.0 && s <= 1.0, "sojourn: s must lie in (0, 1]");
  double L = 0.0;
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (times[j - 1] >= s) break;
    if (path[j] > u) L += std::min(times[j], s) - times[j - 1];
  }
  return L;
}

inline SojournSample sojourn(std::span<const double> path, std::span<const double> times, double u,
                             double s = 1.0, double q = 1.0, std::size_t r = 1) {
  SojournSample out;
  out.L = sojourn_time(path, times, u, s);
  out.u = u;
  out.r = r;
  out.normalized = out.L / q;
  return out;
}

/// Level on [0, 1] equivalent to level u on [0, T]: T^{-kappa} u.
inline double horizon_rescale(double u, double T, double kappa) {
  detail::require(T > 0.0, "horizon_rescale: T must be positive");
  return std::pow(T, -kappa) * u;
}

/// Sup above u on the grid but no right endpoint above u (only possible at
/// the first grid point).
inline bool sup_sojourn_inconsistent(std::span<const double> path, double u, double L) {
  return L == 0.0 && path_sup(path) > u;
}

struct RatioEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// mean((Y - x)^+) / mean(Y), i.e. the integral over y > x of P(Y > y)
/// divided by E[Y], with a delta-method standard error.
inline RatioEstimate excess_integral(std::span<const double> samples, double x) {
  detail::require(x >= 0.0, "excess_integral: x must be non-negative");
  RatioMoments m;
  bool positive = false;
  for (double y : samples) {
    positive = positive || y > 0.0;
    m.add(std::max(y - x, 0.0), y);
  }
  if (!positive) throw UndefinedRatio("excess_integral: all sojourn samples are zero");
  if (x == 0.0) return {1.0, 0.0};
  return {m.ratio(), m.std_error()};
}

}  // namespace ssx
