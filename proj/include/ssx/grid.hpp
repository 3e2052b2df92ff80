#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "ssx/error.hpp"

namespace ssx {

enum class GridLayout { uniform, log_uniform };

inline std::string_view to_string(GridLayout layout) {
  return layout == GridLayout::uniform ? "uniform" : "log-uniform";
}

inline GridLayout parse_layout(std::string_view s) {
  if (s == "uniform") return GridLayout::uniform;
  if (s == "log-uniform" || s == "log") return GridLayout::log_uniform;
  throw InvalidParameter("unknown grid layout '" + std::string(s) + "'");
}

struct GridSpec {
  std::vector<double> times;
  GridLayout layout = GridLayout::uniform;
  double t_min = 0.0;  // first point of a log-uniform grid

  std::size_t size() const noexcept { return times.size(); }
  double operator[](std::size_t i) const { return times[i]; }

  /// Spacing in log t for log-uniform grids.
  double log_step() const {
    return std::log(times.back() / times.front()) / static_cast<double>(times.size() - 1);
  }

  /// Cell lengths of the right-endpoint rule: cell j is (t_{j-1}, t_j];
  /// the first point has no cell.
  std::vector<double> cell_lengths() const {
    std::vector<double> c(times.size(), 0.0);
    for (std::size_t j = 1; j < times.size(); ++j) c[j] = times[j] - times[j - 1];
    return c;
  }
};

/// uniform: {1/N, ..., 1}; log-uniform: N points geometric from t_min to 1.
inline GridSpec make_grid(GridLayout layout, std::size_t n, double t_min = 1e-3) {
  detail::require(n >= 2, "grid needs at least two points");
  GridSpec g;
  g.layout = layout;
  g.times.resize(n);
  if (layout == GridLayout::uniform) {
    for (std::size_t i = 0; i < n; ++i) g.times[i] = static_cast<double>(i + 1) / static_cast<double>(n);
    g.t_min = g.times.front();
  } else {
    detail::require(t_min > 0.0 && t_min < 1.0, "log-uniform grid needs 0 < t_min < 1");
    const double span = -std::log(t_min);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = -span * static_cast<double>(n - 1 - i) / static_cast<double>(n - 1);
      g.times[i] = std::exp(s);
    }
    g.times.back() = 1.0;
    g.t_min = t_min;
  }
  return g;
}

/// Arbitrary strictly increasing grid in (0, 1].
inline GridSpec custom_grid(std::vector<double> times) {
  detail::require(!times.empty(), "grid must not be empty");
  detail::require(times.front() > 0.0 && times.back() <= 1.0, "grid points must lie in (0, 1]");
  for (std::size_t i = 1; i < times.size(); ++i) {
    detail::require(times[i] > times[i - 1], "grid points must be strictly increasing");
  }
  GridSpec g;
  g.layout = GridLayout::uniform;
  g.t_min = times.front();
  g.times = std::move(times);
  return g;
}

/// Log-uniform grid on [t_min, 1] whose last step is at most `step`
/// (q(u)/8 by default in the harness).
inline GridSpec default_grid_for(double step, double t_min = 1e-3) {
  detail::require(step > 0.0 && step < 1.0, "grid step must lie in (0, 1)");
  const double per_cell = -std::log1p(-step);
  const auto n = static_cast<std::size_t>(std::ceil(-std::log(t_min) / per_cell)) + 1;
  return make_grid(GridLayout::log_uniform, std::max<std::size_t>(n, 2), t_min);
}

}  // namespace ssx
