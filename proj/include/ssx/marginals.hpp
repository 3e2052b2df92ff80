#pragma once

// Marginal laws of X(1): standard normal, or the skew-Gaussian
//   zeta = delta |chi| + sqrt(1 - delta^2) X_{m+1}
// whose tail is obtained by quadrature over the chi_m density.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "ssx/error.hpp"
#include "ssx/numeric.hpp"

namespace ssx {

/// Auxiliary rate of the Gumbel domain of attraction for all built-in laws.
inline double rate_w(double u) { return std::max(1.0, u); }

class MarginalLaw {
 public:
  using Function = std::function<double(double)>;

  MarginalLaw(std::string name, Function tail, Function cdf, Function upper_quantile,
              bool gaussian)
      : name_(std::move(name)),
        tail_(std::move(tail)),
        cdf_(std::move(cdf)),
        upper_quantile_(std::move(upper_quantile)),
        gaussian_(gaussian) {}

  /// P(X(1) > u).
  double tail(double u) const { return tail_(u); }
  double cdf(double u) const { return cdf_(u); }
  /// Level with cdf = p.
  double quantile(double p) const {
    detail::require(p > 0.0 && p < 1.0, "quantile: probability must lie in (0, 1)");
    return upper_quantile_(1.0 - p);
  }
  /// Level exceeded with probability p; exact for tiny p.
  double upper_quantile(double p) const {
    detail::require(p > 0.0 && p < 1.0, "upper_quantile: probability must lie in (0, 1)");
    return upper_quantile_(p);
  }
  double w(double u) const { return rate_w(u); }
  double right_endpoint() const { return numeric::kInf; }
  bool gaussian() const noexcept { return gaussian_; }
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  Function tail_;
  Function cdf_;
  Function upper_quantile_;
  bool gaussian_;
};

inline MarginalLaw gaussian_marginal() {
  return MarginalLaw("gaussian", numeric::normal_tail, numeric::normal_cdf,
                     numeric::normal_upper_quantile, true);
}

namespace detail {

// Upper quantile of a continuous, strictly decreasing tail by bracketing and
// TOMS 748 on log(tail).
inline double invert_tail(const std::function<double(double)>& tail, double p, double guess) {
  const double target = std::log(p);
  auto f = [&](double u) { return std::log(tail(u)) - target; };
  double lo = guess - 1.0, hi = guess + 1.0;
  for (int i = 0; i < 200 && f(lo) < 0.0; ++i) lo -= (guess - lo) + 1.0;
  for (int i = 0; i < 200 && f(hi) > 0.0; ++i) hi += (hi - guess) + 1.0;
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (root.first + root.second);
}

struct SkewParams {
  double delta;
  unsigned m;
  double sigma;      // sqrt(1 - delta^2)
  double log_norm;   // log of the chi_m density normalizer
  double s_upper;    // chi_m quantile at 1 - 1e-12
};

inline double chi_density(const SkewParams& p, double s) {
  if (s <= 0.0) return 0.0;
  return std::exp(p.log_norm + (p.m - 1.0) * std::log(s) - 0.5 * s * s);
}

// Integral over the chi_m density of Phi-bar((u - delta s)/sigma) (upper) or
// Phi((u - delta s)/sigma) (lower).
inline double skew_integral(const SkewParams& p, double u, bool upper) {
  const double peak = std::max(0.0, p.delta * u);
  // The integrand concentrates near s = delta u for large u; the chi_m
  // truncation point alone would cut it off.
  const double top = std::max(p.s_upper, peak + 12.0);
  auto integrand = [&](double s) {
    const double z = (u - p.delta * s) / p.sigma;
    return chi_density(p, s) * (upper ? numeric::normal_tail(z) : numeric::normal_cdf(z));
  };
  const double breaks[] = {std::sqrt(std::max(p.m - 1.0, 0.0)), peak};
  const double b0 = std::min(breaks[0], breaks[1]);
  const double b1 = std::max(breaks[0], breaks[1]);
  const double sorted[] = {b0, b1};
  return numeric::integrate_split(integrand, 0.0, top, sorted, 1e-12).value;
}

}  // namespace detail

/// Marginal of zeta(1) for 0 <= delta <= 1 and m >= 1.
inline MarginalLaw skew_marginal(double delta, int m) {
  detail::require(delta >= 0.0 && delta <= 1.0, "skew_marginal: delta must lie in [0, 1]");
  detail::require(m >= 1, "skew_marginal: m must be a positive integer");
  std::ostringstream name;
  name << "skew(delta=" << delta << ", m=" << m << ")";
  if (delta == 0.0) {
    return MarginalLaw(name.str(), numeric::normal_tail, numeric::normal_cdf,
                       numeric::normal_upper_quantile, false);
  }
  if (delta == 1.0) {
    const boost::math::chi_squared_distribution<double> chi2(m);
    auto tail = [chi2](double u) {
      return u <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(chi2, u * u));
    };
    auto cdf = [chi2](double u) { return u <= 0.0 ? 0.0 : boost::math::cdf(chi2, u * u); };
    auto upper = [chi2](double p) {
      return std::sqrt(boost::math::quantile(boost::math::complement(chi2, p)));
    };
    return MarginalLaw(name.str(), tail, cdf, upper, false);
  }
  const boost::math::chi_squared_distribution<double> chi2(m);
  const auto params = std::make_shared<detail::SkewParams>(detail::SkewParams{
      delta, static_cast<unsigned>(m), std::sqrt(1.0 - delta * delta),
      (1.0 - 0.5 * m) * std::log(2.0) - boost::math::lgamma(0.5 * m),
      std::sqrt(boost::math::quantile(boost::math::complement(chi2, 1e-12)))});
  auto tail = [params](double u) { return detail::skew_integral(*params, u, true); };
  auto cdf = [params](double u) { return detail::skew_integral(*params, u, false); };
  auto upper = [tail](double p) {
    return detail::invert_tail(tail, p, numeric::normal_upper_quantile(p));
  };
  return MarginalLaw(name.str(), tail, cdf, upper, false);
}

}  // namespace ssx
