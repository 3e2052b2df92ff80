#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include "ssx/error.hpp"

namespace ssx::numeric {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Upper tail of the standard normal, accurate deep into the tail.
inline double normal_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Level exceeded with probability p.
inline double normal_upper_quantile(double p) {
  static const boost::math::normal_distribution<double> unit{};
  return boost::math::quantile(boost::math::complement(unit, p));
}

inline double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> unit{};
  return boost::math::quantile(unit, p);
}

inline double binomial(unsigned n, unsigned k) {
  return boost::math::binomial_coefficient<double>(n, k);
}

struct Integral {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (15/31) on [a, b].
template <class F>
Integral integrate(F&& f, double a, double b, double rel_tol = 1e-10, unsigned max_depth = 30) {
  if (!(b > a)) return {};
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, max_depth, rel_tol, &err);
  return {value, err};
}

/// Splits [a, b] at the given interior points before integrating each piece.
template <class F, class Points>
Integral integrate_split(F&& f, double a, double b, const Points& breaks, double rel_tol = 1e-10,
                         unsigned max_depth = 30) {
  Integral total;
  double left = a;
  auto accumulate = [&](double right) {
    if (right <= left) return;
    const Integral piece = integrate(f, left, right, rel_tol, max_depth);
    total.value += piece.value;
    total.error += piece.error;
    left = right;
  };
  for (double p : breaks) {
    if (p > a && p < b) accumulate(p);
  }
  accumulate(b);
  return total;
}

/// P(A > a, B <= b) for a centred bivariate normal with variances va, vb and
/// covariance c.  One-dimensional integral over B; no differencing of
/// orthants, so tiny probabilities keep their relative accuracy.
inline double bivariate_upper_lower(double a, double b, double va, double vb, double c) {
  detail::require(va > 0.0 && vb > 0.0, "bivariate normal: variances must be positive");
  const double sb = std::sqrt(vb);
  const double slope = c / sb;  // A = slope * Z + s * N, B = sb * Z
  const double s2 = va - slope * slope;
  const double zb = b / sb;
  if (s2 <= 1e-300) {
    // A is a deterministic multiple of B.
    if (slope > 0.0) {
      const double z0 = a / slope;
      return z0 < zb ? std::max(0.0, normal_cdf(zb) - normal_cdf(z0)) : 0.0;
    }
    return 0.0;
  }
  const double s = std::sqrt(s2);
  auto integrand = [&](double z) { return normal_pdf(z) * normal_tail((a - slope * z) / s); };
  const double lo = std::max(std::min(zb, -40.0), zb - 60.0);
  std::array<double, 6> breaks = {zb - 8.0, zb - 2.0, zb - 0.5, 0.0, 0.0, 0.0};
  if (slope > 0.0) {
    // Where the conditional tail switches on.
    const double z0 = a / slope;
    const double width = s / slope;
    breaks[3] = z0 - width;
    breaks[4] = z0;
    breaks[5] = z0 + width;
  } else {
    breaks[3] = breaks[4] = breaks[5] = lo;
  }
  std::sort(breaks.begin(), breaks.end());
  // Pieces where the integrand sits at the edge of underflow never meet a
  // relative tolerance; the breaks already isolate the features, so a
  // shallow depth suffices.
  return integrate_split(integrand, lo, zb, breaks, 1e-12, 10).value;
}

}  // namespace ssx::numeric
