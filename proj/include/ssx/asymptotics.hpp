#pragma once

// Closed forms and limit constants: tails of X_{r:n}(1), the mean sojourn
// time, the occupation law Theta_r of the limit cluster process and its
// slope at zero, the sojourn-based predictions and the t_a^u(k) sequence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ssx/error.hpp"
#include "ssx/marginals.hpp"
#include "ssx/numeric.hpp"
#include "ssx/parallel.hpp"
#include "ssx/pathsim.hpp"
#include "ssx/rng.hpp"
#include "ssx/scaling.hpp"

namespace ssx {

// ------------------------------------------------------ order-statistic tails

inline void check_order(std::size_t n, std::size_t r) {
  if (!(n >= 1 && r >= 1 && r <= n)) {
    std::ostringstream os;
    os << "order statistic needs 1 <= r <= n (got r=" << r << ", n=" << n << ")";
    throw InvalidParameter(os.str());
  }
}

/// P(at least r of n independent events of probability g), summed in the
/// log domain so that g far below 1e-12 keeps full relative accuracy.
inline double order_tail_from(double g, std::size_t n, std::size_t r) {
  check_order(n, r);
  detail::require(g >= 0.0 && g <= 1.0, "order tail: probability outside [0, 1]");
  if (g == 0.0) return 0.0;
  if (g == 1.0) return 1.0;
  const double lg = std::log(g), lq = std::log1p(-g);
  double total = 0.0;
  for (std::size_t j = n; j >= r; --j) {
    const double log_c = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
    total += std::exp(log_c + static_cast<double>(j) * lg + static_cast<double>(n - j) * lq);
    if (j == 0) break;
  }
  return std::min(total, 1.0);
}

inline double order_tail_exact(double u, std::size_t n, std::size_t r, const MarginalLaw& marginal) {
  check_order(n, r);
  return order_tail_from(marginal.tail(u), n, r);
}

struct OrderTailAsymptotic {
  double value = 0.0;
  double w_r = 0.0;  // auxiliary rate r w(u) of G_r
};

/// Leading term C(n, r) G-bar(u)^r.
inline OrderTailAsymptotic order_tail_asymptotic(double u, std::size_t n, std::size_t r,
                                                 const MarginalLaw& marginal) {
  check_order(n, r);
  const double g = marginal.tail(u);
  const double log_c = std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
  return {std::exp(log_c + static_cast<double>(r) * std::log(g)),
          static_cast<double>(r) * marginal.w(u)};
}

// ------------------------------------------------------------- mean sojourn

/// E[L_r(u)] = integral over (0, 1] of G-bar_r(u t^{-kappa}) dt.
inline double mean_sojourn_exact(double u, std::size_t n, std::size_t r,
                                 const MarginalLaw& marginal, double kappa,
                                 double rel_tol = 1e-6) {
  check_order(n, r);
  detail::require(u > 0.0, "mean_sojourn_exact: level u must be positive");
  detail::require(kappa > 0.0, "mean_sojourn_exact: kappa must be positive");
  auto f = [&](double t) {
    return t <= 0.0 ? 0.0 : order_tail_exact(u * std::pow(t, -kappa), n, r, marginal);
  };
  // The integrand decays on the scale 1 / (kappa r u w(u)) below t = 1.
  const double scale = 1.0 / (kappa * static_cast<double>(r) * u * marginal.w(u));
  std::vector<double> breaks;
  for (double m : {60.0, 20.0, 6.0, 2.0, 0.5}) {
    if (m * scale < 1.0) breaks.push_back(1.0 - m * scale);
  }
  const auto result = numeric::integrate_split(f, 0.0, 1.0, breaks, 1e-10);
  if (!(result.error <= rel_tol * std::abs(result.value)) && result.value > 0.0) {
    std::ostringstream os;
    os << "mean_sojourn_exact: quadrature did not converge (u=" << u << ", value "
       << result.value << ", error estimate " << result.error << ")";
    throw NumericalError(os.str());
  }
  return result.value;
}

/// G-bar_r(u) / (kappa u w_r(u)); with `exact_tail` false the leading
/// binomial term replaces the exact order tail.
inline double mean_sojourn_asymptotic(double u, std::size_t n, std::size_t r,
                                      const MarginalLaw& marginal, double kappa,
                                      bool exact_tail = true) {
  check_order(n, r);
  detail::require(u > 0.0, "mean_sojourn_asymptotic: level u must be positive");
  const auto lead = order_tail_asymptotic(u, n, r, marginal);
  const double tail = exact_tail ? order_tail_exact(u, n, r, marginal) : lead.value;
  return tail / (kappa * u * lead.w_r);
}

// ------------------------------------------------------------------ Theta_r

inline double theta_case_b(double x, double kappa, std::size_t r) {
  detail::require(x >= 0.0, "theta_case_b: x must be non-negative");
  return std::exp(-kappa * static_cast<double>(r) * x);
}

struct ThetaConfig {
  std::size_t draws = 100000;
  std::size_t batch = 4096;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  double step = 0.0;          // 0: min(0.05, 0.2 D^{-1/alpha})
  double horizon = 0.0;       // initial T; 0: automatic
  double beyond_tol = 1e-3;   // accepted P(occupation beyond T/2)
  std::size_t pilot = 20000;  // draws used to choose the horizon
};

struct ThetaEstimate {
  std::size_t r = 1;
  double alpha = 1.0, D = 0.5, kappa = 0.5, beta4 = 1.0;
  bool drift_only = false;  // xi(t) = E - kappa t (alpha in (1, 2])
  std::vector<double> x;
  std::vector<double> theta;       // P(occupation > x)
  std::vector<double> theta_left;  // P(occupation >= x), the left limit Theta(x-)
  std::vector<double> std_error;
  double mean_occupation = 0.0;
  double horizon = 0.0;
  double step = 0.0;
  double beyond_fraction = 0.0;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
};

namespace detail {

struct OccupationCounts {
  std::vector<std::size_t> greater, greater_equal;
  double occupation_sum = 0.0;
  std::size_t beyond = 0;
  std::size_t n = 0;

  void merge(const OccupationCounts& o) {
    if (greater.empty()) {
      greater.assign(o.greater.size(), 0);
      greater_equal.assign(o.greater_equal.size(), 0);
    }
    for (std::size_t i = 0; i < greater.size(); ++i) {
      greater[i] += o.greater[i];
      greater_equal[i] += o.greater_equal[i];
    }
    occupation_sum += o.occupation_sum;
    beyond += o.beyond;
    n += o.n;
  }
};

// Fractional Gaussian noise sampler with Hurst index H and spacing delta.
class FgnSampler {
 public:
  FgnSampler(double H, double delta, std::size_t length) : H_(H), length_(length) {
    sd_ = std::pow(delta, H);
    if (H != 0.5 && length > 1) {
      const double two_h = 2.0 * H;
      StationaryKernel acf("fgn", H, [two_h](double k) {
        return 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) +
                      std::pow(std::abs(k - 1.0), two_h));
      });
      plan_ = plan_circulant(acf, length, 1.0);
    }
  }

  void sample(RngStream& rng, std::vector<double>& out, RowMatrix& scratch,
              CirculantWorkspace& ws) const {
    out.resize(length_);
    if (!plan_) {
      for (auto& v : out) v = sd_ * rng.normal();
      return;
    }
    scratch.resize(1, static_cast<Eigen::Index>(length_));
    sample_circulant_rows(*plan_, rng, scratch, ws);
    for (std::size_t k = 0; k < length_; ++k) out[k] = sd_ * scratch(0, static_cast<Eigen::Index>(k));
  }

 private:
  double H_;
  std::size_t length_;
  double sd_ = 1.0;
  std::optional<CirculantPlan> plan_;
};

inline std::size_t lattice_floor(double x, double h) {
  return static_cast<std::size_t>(std::floor(x / h + 1e-9));
}
inline std::size_t lattice_ceil(double x, double h) {
  const double v = std::ceil(x / h - 1e-9);
  return v <= 0.0 ? 0 : static_cast<std::size_t>(v);
}

// Occupation counts for one batch of the full limit process on [0, T].
inline OccupationCounts theta_batch(const ThetaEstimate& spec, const std::vector<double>& drift,
                                    double h, const FgnSampler& fgn, std::uint64_t seed,
                                    std::size_t batch_index, std::size_t count) {
  OccupationCounts out;
  out.greater.assign(spec.x.size(), 0);
  out.greater_equal.assign(spec.x.size(), 0);
  std::vector<std::size_t> gt_cut(spec.x.size()), ge_cut(spec.x.size());
  for (std::size_t i = 0; i < spec.x.size(); ++i) {
    gt_cut[i] = lattice_floor(spec.x[i], h);
    ge_cut[i] = lattice_ceil(spec.x[i], h);
  }
  RngStream rng(seed, static_cast<std::uint32_t>(batch_index), 0);
  const std::size_t M = drift.size() - 1;
  const std::size_t half = M / 2;
  std::vector<double> xi_min(M + 1), noise;
  RowMatrix scratch;
  CirculantWorkspace ws;
  for (std::size_t d = 0; d < count; ++d) {
    std::fill(xi_min.begin(), xi_min.end(), numeric::kInf);
    for (std::size_t i = 0; i < spec.r; ++i) {
      const double e = rng.exponential();
      fgn.sample(rng, noise, scratch, ws);
      double z = 0.0;
      xi_min[0] = std::min(xi_min[0], e);
      for (std::size_t k = 1; k <= M; ++k) {
        z += noise[k - 1];
        xi_min[k] = std::min(xi_min[k], std::numbers::sqrt2 * z + drift[k] + e);
      }
    }
    std::size_t cells = 0;
    bool beyond = false;
    for (std::size_t k = 1; k <= M; ++k) {
      if (xi_min[k] > 0.0) {
        ++cells;
        beyond = beyond || k > half;
      }
    }
    for (std::size_t i = 0; i < spec.x.size(); ++i) {
      if (spec.x[i] == 0.0) {
        ++out.greater[i];
        ++out.greater_equal[i];
        continue;
      }
      if (cells > gt_cut[i]) ++out.greater[i];
      if (cells >= ge_cut[i]) ++out.greater_equal[i];
    }
    out.occupation_sum += static_cast<double>(cells) * h;
    out.beyond += beyond ? 1 : 0;
    ++out.n;
  }
  return out;
}

// Drift-only limit: xi_{r:r}(t) = min_i E_i - kappa t crosses zero at
// min_i E_i / kappa, so the occupation is exact.
inline OccupationCounts theta_batch_drift(const ThetaEstimate& spec, std::uint64_t seed,
                                          std::size_t batch_index, std::size_t count) {
  OccupationCounts out;
  out.greater.assign(spec.x.size(), 0);
  out.greater_equal.assign(spec.x.size(), 0);
  RngStream rng(seed, static_cast<std::uint32_t>(batch_index), 0);
  for (std::size_t d = 0; d < count; ++d) {
    double e = numeric::kInf;
    for (std::size_t i = 0; i < spec.r; ++i) e = std::min(e, rng.exponential());
    const double occ = e / spec.kappa;
    for (std::size_t i = 0; i < spec.x.size(); ++i) {
      if (spec.x[i] == 0.0 || occ > spec.x[i]) ++out.greater[i];
      if (spec.x[i] == 0.0 || occ >= spec.x[i]) ++out.greater_equal[i];
    }
    out.occupation_sum += occ;
    ++out.n;
  }
  return out;
}

inline OccupationCounts run_theta(const ThetaEstimate& spec, double T, double h, std::size_t draws,
                                  const ThetaConfig& cfg) {
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);
  const std::size_t batches = (draws + batch - 1) / batch;
  auto size_of = [&](std::size_t b) { return std::min(batch, draws - b * batch); };
  std::vector<OccupationCounts> parts;
  if (spec.drift_only) {
    parts = run_batches<OccupationCounts>(batches, resolve_workers(cfg.workers), [&](std::size_t b) {
      return theta_batch_drift(spec, cfg.seed, b, size_of(b));
    });
  } else {
    const auto M = static_cast<std::size_t>(std::llround(T / h));
    std::vector<double> drift(M + 1);
    for (std::size_t k = 0; k <= M; ++k) {
      const double t = static_cast<double>(k) * h;
      drift[k] = -spec.D * std::pow(t, spec.alpha) - spec.beta4 * spec.kappa * t;
    }
    const FgnSampler fgn(0.5 * spec.alpha, h * std::pow(spec.D, 1.0 / spec.alpha), M);
    parts = run_batches<OccupationCounts>(batches, resolve_workers(cfg.workers), [&](std::size_t b) {
      return theta_batch(spec, drift, h, fgn, cfg.seed, b, size_of(b));
    });
  }
  OccupationCounts total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace detail

inline constexpr double kHorizonGrowthLimit = 65536.0;  // 2^16

/// Monte-Carlo estimate of Theta_r(x) = P(occupation of {xi_{r:r} > 0} > x)
/// for xi_i(t) = sqrt(2) Z_i(D^{1/alpha} t) - D t^alpha + E_i - beta4 kappa t.
/// For alpha > 1 the drift-only limit xi(t) = E - kappa t is used.
inline ThetaEstimate estimate_theta(std::size_t r, double alpha, double D, double kappa,
                                    double beta4, std::vector<double> x_grid,
                                    const ThetaConfig& cfg = {}) {
  detail::require(r >= 1, "estimate_theta: r must be at least 1");
  detail::require(alpha > 0.0 && alpha <= 2.0, "estimate_theta: alpha must lie in (0, 2]");
  alpha = snap_alpha(alpha);
  detail::require(D > 0.0 && kappa > 0.0, "estimate_theta: D and kappa must be positive");
  detail::require(cfg.draws >= 1, "estimate_theta: need at least one draw");
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    detail::require(x_grid[i] >= 0.0, "estimate_theta: x grid must be non-negative");
    detail::require(i == 0 || x_grid[i] > x_grid[i - 1], "estimate_theta: x grid must increase");
  }
  ThetaEstimate est;
  est.r = r;
  est.alpha = alpha;
  est.D = D;
  est.kappa = kappa;
  est.beta4 = drift_only_regime(alpha) ? 1.0 : beta4;
  est.drift_only = drift_only_regime(alpha);
  est.x = std::move(x_grid);
  est.seed = cfg.seed;

  double T = 0.0, h = 0.0;
  if (!est.drift_only) {
    h = cfg.step > 0.0 ? cfg.step : std::min(0.05, 0.2 * std::pow(D, -1.0 / alpha));
    double T0 = cfg.horizon;
    if (T0 <= 0.0) {
      // Where the mean drift reaches -8.
      T0 = 1.0;
      while (D * std::pow(T0, alpha) + est.beta4 * kappa * T0 < 8.0) T0 *= 2.0;
    }
    T0 = std::max(T0, 4.0 * h);
    T = T0;
    ThetaConfig pilot_cfg = cfg;
    pilot_cfg.seed = cfg.seed ^ 0x9E3779B97F4A7C15ull;
    const std::size_t pilot = std::min(cfg.draws, std::max<std::size_t>(cfg.pilot, 1));
    for (;;) {
      const auto counts = detail::run_theta(est, T, h, pilot, pilot_cfg);
      if (static_cast<double>(counts.beyond) < cfg.beyond_tol * static_cast<double>(counts.n)) break;
      T *= 2.0;
      if (T > kHorizonGrowthLimit * T0) {
        std::ostringstream os;
        os << "estimate_theta: occupation still extends beyond T/2 at T=" << T
           << " (initial horizon " << T0 << ")";
        throw HorizonError(os.str());
      }
    }
  }
  const auto counts = detail::run_theta(est, T, h, cfg.draws, cfg);
  const double n = static_cast<double>(counts.n);
  est.draws = counts.n;
  est.horizon = T;
  est.step = h;
  est.mean_occupation = counts.occupation_sum / n;
  est.beyond_fraction = static_cast<double>(counts.beyond) / n;
  for (std::size_t i = 0; i < est.x.size(); ++i) {
    if (est.x[i] == 0.0) {
      est.theta.push_back(1.0);
      est.theta_left.push_back(1.0);
      est.std_error.push_back(0.0);
      continue;
    }
    const double p = static_cast<double>(counts.greater[i]) / n;
    est.theta.push_back(p);
    est.theta_left.push_back(static_cast<double>(counts.greater_equal[i]) / n);
    est.std_error.push_back(std::sqrt(p * (1.0 - p) / n));
  }
  return est;
}

struct SlopeEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::vector<double> x_used;
};

/// -Theta'(0) by a weighted least-squares line through the origin fitted
/// to 1 - Theta(x) at the 3-5 smallest positive x below half the mean
/// occupation.  The slope is a fixed linear combination of empirical CDF
/// values, so its variance follows exactly from that CDF.
inline SlopeEstimate theta_prime_at_zero(const ThetaEstimate& theta) {
  const double x_max = 0.5 * theta.mean_occupation;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < theta.x.size() && idx.size() < 5; ++i) {
    if (theta.x[i] > 0.0 && theta.x[i] <= x_max) idx.push_back(i);
  }
  if (idx.size() < 3) {
    std::ostringstream os;
    os << "theta_prime_at_zero: need at least 3 x values in (0, " << x_max
       << "] (half the mean occupation); refine the x grid";
    throw EstimationFailure(os.str());
  }
  const double n = static_cast<double>(std::max<std::size_t>(theta.draws, 1));
  std::vector<double> F(idx.size()), w(idx.size()), a(idx.size());
  double sxx = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx[k];
    F[k] = 1.0 - theta.theta[i];
    const double var = std::max(F[k] * (1.0 - F[k]), 1.0 / n);
    w[k] = 1.0 / var;
    sxx += w[k] * theta.x[i] * theta.x[i];
  }
  SlopeEstimate out;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    a[k] = w[k] * theta.x[idx[k]] / sxx;
    out.value += a[k] * F[k];
    out.x_used.push_back(theta.x[idx[k]]);
  }
  // slope = mean of g(occ) with g = sum_k a_k 1{occ <= x_k}; x increasing.
  double second = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    for (std::size_t l = 0; l < idx.size(); ++l) second += a[k] * a[l] * F[std::min(k, l)];
  }
  out.std_error = std::sqrt(std::max(0.0, second - out.value * out.value) / n);
  if (!(out.value > 0.0)) {
    throw EstimationFailure("theta_prime_at_zero: slope estimate is not positive; the x grid "
                            "does not resolve the decay of Theta near 0");
  }
  return out;
}

/// Closed-form counterpart of theta_prime_at_zero for the drift-only case.
inline double theta_prime_case_b(double kappa, std::size_t r) {
  return kappa * static_cast<double>(r);
}

inline void write_theta_csv(const ThetaEstimate& est, std::ostream& os, bool closed_form) {
  const auto old = os.precision(12);
  os << "x,theta,stderr,theta_left";
  if (closed_form) os << ",closed_form";
  os << '\n';
  for (std::size_t i = 0; i < est.x.size(); ++i) {
    os << est.x[i] << ',' << est.theta[i] << ',' << est.std_error[i] << ',' << est.theta_left[i];
    if (closed_form) os << ',' << theta_case_b(est.x[i], est.kappa, est.r);
    os << '\n';
  }
  os.precision(old);
}

// ------------------------------------------------------------- predictions

struct Prediction {
  double value = 0.0;
  bool applicable = true;
  std::string note;
};

/// -Theta'(0) E[L_r(u)] / q(u).
inline Prediction p_prediction_thm4(double u, std::size_t n, std::size_t r,
                                    const MarginalLaw& marginal, double kappa,
                                    const ScalingScheme& scheme, double theta_prime) {
  Prediction p;
  p.value = theta_prime * mean_sojourn_exact(u, n, r, marginal, kappa) / scheme.q(u);
  p.applicable = scheme.thm4_applicable();
  if (scheme.via_b_cstar) p.note = "applicable through conditions B and C*";
  if (!p.applicable) p.note = "scaling limits outside 0 < beta3 <= beta4 < inf";
  return p;
}

/// Exact order tail; the limit holds only when beta3 is infinite.
inline Prediction p_prediction_thm3(double u, std::size_t n, std::size_t r,
                                    const MarginalLaw& marginal, const ScalingScheme& scheme) {
  Prediction p;
  p.value = order_tail_exact(u, n, r, marginal);
  p.applicable = scheme.thm3_applicable();
  if (!p.applicable) p.note = "not applicable: beta3 is finite for this scaling scheme";
  return p;
}

// ------------------------------------------------------------ t-sequence

struct TSequence {
  double a = 0.0;
  double u = 0.0;
  std::vector<double> points;  // t(0) = 1 > t(1) > ...
  std::size_t K = 0;           // last index
};

/// t(k+1) = t(k) (1 - a q(t(k)^{-kappa} u)), from t(0) = 1 until t(k) <= t_min.
inline TSequence t_sequence(double a, double u, double kappa, const ScalingScheme& scheme,
                            double t_min = 1e-3, std::size_t max_points = 10'000'000) {
  detail::require(a > 0.0 && a <= scheme.a_tilde(), "t_sequence: a must lie in (0, a-tilde]");
  detail::require(u > 0.0, "t_sequence: u must be positive");
  detail::require(t_min > 0.0 && t_min < 1.0, "t_sequence: t_min must lie in (0, 1)");
  TSequence seq;
  seq.a = a;
  seq.u = u;
  double t = 1.0;
  seq.points.push_back(t);
  while (t > t_min && seq.points.size() < max_points) {
    t = t * (1.0 - a * scheme.q(std::pow(t, -kappa) * u));
    seq.points.push_back(t);
  }
  seq.K = seq.points.size() - 1;
  return seq;
}

}  // namespace ssx
