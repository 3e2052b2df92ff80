#pragma once

// Covariance kernels of self-similar Gaussian processes, their Lamperti
// (stationary) counterparts and the local expansion
//   R(1, 1+t) = 1 + kappa t - D |t|^alpha + o(|t| + |t|^alpha).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <boost/math/tools/minima.hpp>

#include "ssx/error.hpp"
#include "ssx/linalg.hpp"

namespace ssx {

struct KernelParam {
  std::string name;
  double value = 0.0;
};

class CovarianceKernel {
 public:
  using Function = std::function<double(double, double)>;

  CovarianceKernel(std::string name, std::vector<KernelParam> params, double kappa, Function f)
      : name_(std::move(name)), params_(std::move(params)), kappa_(kappa), f_(std::move(f)) {
    detail::require(kappa_ > 0.0, "kernel index kappa must be positive");
  }

  double operator()(double s, double t) const { return f_(s, t); }
  double evaluate(double s, double t) const { return f_(s, t); }

  double kappa() const noexcept { return kappa_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<KernelParam>& params() const noexcept { return params_; }
  double variance_at_one() const { return f_(1.0, 1.0); }
  double sd(double t) const { return std::sqrt(f_(t, t)); }

  std::string describe() const {
    std::ostringstream os;
    os << name_;
    if (!params_.empty()) {
      os << '(';
      for (std::size_t i = 0; i < params_.size(); ++i) {
        if (i) os << ", ";
        os << params_[i].name << '=' << params_[i].value;
      }
      os << ')';
    }
    return os.str();
  }

 private:
  std::string name_;
  std::vector<KernelParam> params_;
  double kappa_;
  Function f_;
};

inline CovarianceKernel fbm_kernel(double H) {
  detail::require(H > 0.0 && H <= 1.0, "fbm: Hurst index must lie in (0, 1]");
  const double two_h = 2.0 * H;
  return CovarianceKernel("fbm", {{"H", H}}, H, [two_h](double s, double t) {
    return 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) - std::pow(std::abs(s - t), two_h));
  });
}

inline CovarianceKernel bifbm_kernel(double h, double k) {
  detail::require(h > 0.0 && h < 1.0, "bifbm: h must lie in (0, 1)");
  detail::require(k > 0.0 && k <= 1.0, "bifbm: k must lie in (0, 1]");
  const double norm = std::pow(2.0, -k);
  return CovarianceKernel("bifbm", {{"h", h}, {"k", k}}, h * k, [h, k, norm](double s, double t) {
    const double sum = std::pow(s, 2.0 * h) + std::pow(t, 2.0 * h);
    return norm * (std::pow(sum, k) - std::pow(std::abs(s - t), 2.0 * h * k));
  });
}

inline CovarianceKernel subfbm_kernel(double h) {
  detail::require(h > 0.0 && h < 1.0, "subfbm: h must lie in (0, 1)");
  const double two_h = 2.0 * h;
  return CovarianceKernel("subfbm", {{"h", h}}, h, [two_h](double s, double t) {
    return std::pow(s, two_h) + std::pow(t, two_h) -
           0.5 * (std::pow(s + t, two_h) + std::pow(std::abs(s - t), two_h));
  });
}

/// Rescales the kernel so that evaluate(1, 1) = 1.
inline CovarianceKernel standardized(const CovarianceKernel& kernel) {
  const double v = kernel.variance_at_one();
  detail::require(v > 0.0 && std::isfinite(v), "kernel has no positive variance at t=1");
  if (v == 1.0) return kernel;
  auto params = kernel.params();
  return CovarianceKernel(kernel.name(), std::move(params), kernel.kappa(),
                          [kernel, v](double s, double t) { return kernel(s, t) / v; });
}

inline bool is_standardized(const CovarianceKernel& kernel, double tol = 1e-9) {
  return std::abs(kernel.variance_at_one() - 1.0) <= tol;
}

/// Largest relative deviation from R(ls, lt) = l^(2 kappa) R(s, t) over
/// l in {0.5, 2, 10} and a fixed set of points in (0, 1].
inline double self_similarity_defect(const CovarianceKernel& kernel) {
  static constexpr double kLambdas[] = {0.5, 2.0, 10.0};
  static constexpr double kPoints[] = {0.05, 0.2, 0.35, 0.5, 0.71, 0.9, 1.0};
  double worst = 0.0;
  for (double lambda : kLambdas) {
    const double scale = std::pow(lambda, 2.0 * kernel.kappa());
    for (double s : kPoints) {
      for (double t : kPoints) {
        const double base = kernel(s, t);
        const double scaled = kernel(lambda * s, lambda * t);
        const double denom = scale * std::abs(base);
        if (denom == 0.0) continue;
        worst = std::max(worst, std::abs(scaled - scale * base) / denom);
      }
    }
  }
  return worst;
}

/// Attempts the jittered Cholesky factorization of the Gram matrix on
/// `times`; returns the absolute jitter that was needed.
inline double psd_jitter(const CovarianceKernel& kernel, std::span<const double> times) {
  linalg::reject_duplicates(times);
  return linalg::factor_with_jitter(linalg::gram_matrix(kernel, times), times).jitter;
}

/// Covariance of the stationary process e^{-kappa s} X(e^s) as a function
/// of the lag.
class StationaryKernel {
 public:
  using Function = std::function<double(double)>;

  StationaryKernel(std::string name, double kappa, Function f)
      : name_(std::move(name)), kappa_(kappa), f_(std::move(f)) {}

  double operator()(double lag) const { return f_(std::abs(lag)); }
  double variance() const { return f_(0.0); }
  double kappa() const noexcept { return kappa_; }
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  double kappa_;
  Function f_;
};

inline double lamperti_covariance(const CovarianceKernel& kernel, double base, double lag) {
  const double k = kernel.kappa();
  return std::exp(-k * (2.0 * base + lag)) * kernel(std::exp(base), std::exp(base + lag));
}

/// Largest discrepancy between the transformed covariance at base points 0
/// and 1, over `lags` positive lags in (0, 5].
inline double lamperti_stationarity_defect(const CovarianceKernel& kernel, int lags = 50) {
  double worst = 0.0;
  for (int i = 0; i <= lags; ++i) {
    const double lag = 5.0 * i / lags;
    worst = std::max(worst, std::abs(lamperti_covariance(kernel, 0.0, lag) -
                                     lamperti_covariance(kernel, 1.0, lag)));
  }
  return worst;
}

inline StationaryKernel lamperti_kernel(const CovarianceKernel& kernel) {
  const double defect = lamperti_stationarity_defect(kernel);
  if (!(defect <= 1e-9 * std::max(1.0, std::abs(kernel.variance_at_one())))) {
    std::ostringstream os;
    os << "Lamperti transform of " << kernel.describe()
       << " is not stationary (max discrepancy " << defect << ")";
    throw Inconsistency(os.str());
  }
  return StationaryKernel(kernel.name(), kernel.kappa(), [kernel](double lag) {
    return lamperti_covariance(kernel, 0.0, lag);
  });
}

struct LocalExpansion {
  double kappa = 0.0;
  double D = 0.0;
  double alpha = 0.0;
  double residual = 0.0;  // relative RMS misfit of the even part
};

namespace detail {

struct EvenFit {
  double D = 0.0;
  double c = 0.0;
  double residual = std::numeric_limits<double>::infinity();
};

// Weighted least squares of e(t) = -D t^alpha + c t^2 with relative weights.
inline EvenFit fit_even_part(const std::vector<double>& lags, const std::vector<double>& even,
                             double alpha) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(lags.size()), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(lags.size()));
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double w = 1.0 / std::abs(even[i]);
    const auto row = static_cast<Eigen::Index>(i);
    a(row, 0) = -std::pow(lags[i], alpha) * w;
    a(row, 1) = lags[i] * lags[i] * w;
    b(row) = even[i] * w;
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
  EvenFit fit;
  fit.D = coef(0);
  fit.c = coef(1);
  fit.residual = std::sqrt((a * coef - b).squaredNorm() / static_cast<double>(lags.size()));
  return fit;
}

}  // namespace detail

inline constexpr double kExpansionTolerance = 1e-3;

/// Fits (kappa, D, alpha) of the local expansion at t = 1 over 40
/// logarithmically spaced lags in [1e-6, 1e-2], using both signs of the lag:
/// the odd part carries kappa t, the even part -D |t|^alpha.
inline LocalExpansion local_expansion(const CovarianceKernel& kernel,
                                      double tolerance = kExpansionTolerance) {
  detail::require(is_standardized(kernel),
                  "local_expansion needs evaluate(1,1) = 1; standardize the kernel first");
  constexpr int kLags = 40;
  std::vector<double> lags(kLags), odd(kLags), even(kLags);
  double odd_scale = 0.0, even_scale = 0.0;
  for (int i = 0; i < kLags; ++i) {
    const double t = std::pow(10.0, -6.0 + 4.0 * i / (kLags - 1));
    const double plus = kernel(1.0, 1.0 + t) - 1.0;
    const double minus = kernel(1.0, 1.0 - t) - 1.0;
    lags[i] = t;
    odd[i] = 0.5 * (plus - minus);
    even[i] = 0.5 * (plus + minus);
    odd_scale = std::max(odd_scale, std::abs(odd[i]));
    even_scale = std::max(even_scale, std::abs(even[i]));
  }

  // kappa from odd(t) = kappa t + c3 t^3.
  Eigen::MatrixXd a(kLags, 2);
  Eigen::VectorXd b(kLags);
  for (int i = 0; i < kLags; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = lags[i] * lags[i];
    b(i) = odd[i] / lags[i];
  }
  const Eigen::Vector2d odd_coef = a.colPivHouseholderQr().solve(b);
  LocalExpansion out;
  out.kappa = odd_coef(0);
  if (std::abs(out.kappa - kernel.kappa()) > 1e-3) {
    std::ostringstream os;
    os << "fitted drift " << out.kappa << " disagrees with kernel index " << kernel.kappa();
    throw ExpansionNotApplicable(os.str());
  }

  if (even_scale <= 1e-12 * std::max(odd_scale, 1e-300) ||
      std::any_of(even.begin(), even.end(), [](double e) { return !(e < 0.0); })) {
    throw ExpansionNotApplicable("covariance of " + kernel.describe() +
                                 " has no negative |t|^alpha term near t = 1");
  }

  // Profile the residual over alpha: coarse scan, then Brent around the best cell.
  auto objective = [&](double alpha) { return detail::fit_even_part(lags, even, alpha).residual; };
  constexpr int kScan = 200;
  constexpr double kAlphaMax = 2.0 - 1e-6;
  double best_alpha = 0.01, best = objective(0.01);
  for (int i = 1; i <= kScan; ++i) {
    const double alpha = 0.01 + (kAlphaMax - 0.01) * i / kScan;
    const double v = objective(alpha);
    if (v < best) {
      best = v;
      best_alpha = alpha;
    }
  }
  const double cell = (kAlphaMax - 0.01) / kScan;
  const auto refined = boost::math::tools::brent_find_minima(
      objective, std::max(0.005, best_alpha - cell), std::min(kAlphaMax, best_alpha + cell), 52);
  const double alpha = refined.second < best ? refined.first : best_alpha;
  const detail::EvenFit fit = detail::fit_even_part(lags, even, alpha);

  out.alpha = alpha;
  out.D = fit.D;
  out.residual = fit.residual;
  if (!(fit.residual <= tolerance) || !(fit.D > 0.0)) {
    std::ostringstream os;
    os << "local expansion of " << kernel.describe() << " does not fit (residual "
       << fit.residual << ", D " << fit.D << ", alpha " << alpha << ")";
    throw ExpansionNotApplicable(os.str());
  }
  return out;
}

struct SupBoundCheck {
  bool holds = false;
  double max_value = 0.0;
  double argmax = 0.0;
};

/// sup over t in [eps, h] of e^{-kappa t} R(1, e^t), on a dense grid.
inline SupBoundCheck check_supboundcov(const CovarianceKernel& kernel, double eps, double h,
                                       int points = 2001) {
  detail::require(eps > 0.0 && eps <= h, "check_supboundcov: need 0 < eps <= h");
  SupBoundCheck out;
  out.max_value = -std::numeric_limits<double>::infinity();
  const int count = eps == h ? 1 : std::max(points, 2);
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? eps : eps + (h - eps) * i / (count - 1);
    const double v = std::exp(-kernel.kappa() * t) * kernel(1.0, std::exp(t));
    if (v > out.max_value) {
      out.max_value = v;
      out.argmax = t;
    }
  }
  out.holds = out.max_value < 1.0;
  return out;
}

/// Builds a kernel from its configuration name: fbm (H), bifbm (h, k) or
/// subfbm (h).
inline CovarianceKernel make_kernel(const std::string& name, double p1, double p2 = 1.0) {
  if (name == "fbm" || name == "brownian") return fbm_kernel(name == "brownian" ? 0.5 : p1);
  if (name == "bifbm") return bifbm_kernel(p1, p2);
  if (name == "subfbm") return subfbm_kernel(p1);
  throw InvalidParameter("unknown kernel '" + name + "' (expected fbm, brownian, bifbm, subfbm)");
}

}  // namespace ssx
