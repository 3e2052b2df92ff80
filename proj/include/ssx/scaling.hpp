#pragma once

// Scaling functions w(u), q(u) of the limit theorems, with the limits
// beta3 = liminf u q w and beta4 = limsup u q w read off symbolically from
// the exponent of u q w (both are exact power laws for u >= 1).

#include <algorithm>
#include <cmath>

#include "ssx/error.hpp"
#include "ssx/numeric.hpp"

namespace ssx {

/// Fitted exponents carry errors near 1e-8; alpha within this distance of 1
/// is treated as 1, the boundary between the regimes.
inline constexpr double kAlphaTol = 1e-6;

inline double snap_alpha(double alpha) { return std::abs(alpha - 1.0) <= kAlphaTol ? 1.0 : alpha; }
inline bool drift_only_regime(double alpha) { return snap_alpha(alpha) > 1.0; }

struct ScalingScheme {
  double alpha = 1.0;  // local exponent of the kernel
  double kappa = 0.5;
  double D0 = 1.0;     // q(u) ~ D0 u^{-alpha0}
  double alpha0 = 2.0;
  double beta3 = 1.0;
  double beta4 = 1.0;
  /// Sojourn asymptotics reached through conditions B and C* rather than through
  /// 0 < beta3 <= beta4 < infinity.
  bool via_b_cstar = false;

  double w(double u) const { return std::max(1.0, u); }
  double q(double u) const { return std::pow(std::max(1.0, u), -alpha0); }
  double q_sup() const { return 1.0; }
  /// Largest admissible step parameter, 1 / (2 sup q).
  double a_tilde() const { return 0.5 / q_sup(); }
  /// Exponent e of u q w = u^e for u >= 1.
  double uqw_exponent() const { return 2.0 - alpha0; }
  bool thm4_applicable() const {
    return (beta3 > 0.0 && beta3 <= beta4 && std::isfinite(beta4)) || via_b_cstar;
  }
  bool thm3_applicable() const { return std::isinf(beta3); }
  /// Drift coefficient beta4 of the limit process.
  double limit_drift() const { return alpha == 1.0 ? 1.0 : 0.0; }
};

inline ScalingScheme scaling_scheme_for(double alpha, double kappa) {
  detail::require(alpha > 0.0 && alpha <= 2.0, "scaling scheme: alpha must lie in (0, 2]");
  detail::require(kappa > 0.0, "scaling scheme: kappa must be positive");
  ScalingScheme s;
  alpha = snap_alpha(alpha);
  s.alpha = alpha;
  s.kappa = kappa;
  s.D0 = 1.0;
  s.alpha0 = alpha <= 1.0 ? 2.0 / alpha : 2.0;
  const double e = s.uqw_exponent();
  const double limit = e == 0.0 ? 1.0 : (e < 0.0 ? 0.0 : numeric::kInf);
  s.beta3 = limit;
  s.beta4 = limit;
  s.via_b_cstar = !(limit > 0.0 && std::isfinite(limit));
  return s;
}

}  // namespace ssx
