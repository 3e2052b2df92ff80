#pragma once

// Exact Gaussian path simulation on grids of (0, 1]: Cholesky for arbitrary
// grids, circulant embedding of the Lamperti (stationary) sequence for
// log-uniform grids, plus skew-Gaussian assembly, order statistics and
// exact conditioning on a single coordinate.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Core>

#include "ssx/error.hpp"
#include "ssx/fft.hpp"
#include "ssx/grid.hpp"
#include "ssx/kernels.hpp"
#include "ssx/linalg.hpp"
#include "ssx/numeric.hpp"
#include "ssx/rng.hpp"

namespace ssx {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n paths (rows) on a shared grid.  On the stationary side of the Lamperti
/// transform `log_time` is set and grid.times holds s = log t <= 0.
struct PathEnsemble {
  GridSpec grid;
  RowMatrix values;
  StreamId provenance{};
  bool log_time = false;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols(), cols()};
  }
};

// ---------------------------------------------------------------- Cholesky

struct CholeskyPlan {
  GridSpec grid;
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

inline CholeskyPlan plan_cholesky(const CovarianceKernel& kernel, const GridSpec& grid) {
  linalg::reject_duplicates(grid.times);
  auto factor = linalg::factor_with_jitter(linalg::gram_matrix(kernel, grid.times), grid.times);
  return {grid, std::move(factor.lower), factor.jitter};
}

/// Fills `out` (count x N) with rows lower * z, z standard normal; each row
/// consumes N consecutive normals of the stream.
inline void sample_cholesky_rows(const Eigen::MatrixXd& lower, RngStream& rng,
                                 Eigen::Ref<RowMatrix> out) {
  const Eigen::Index n = lower.rows();
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) z(j) = rng.normal();
    out.row(i) = (lower.triangularView<Eigen::Lower>() * z).transpose();
  }
}

inline PathEnsemble sample_paths(const CholeskyPlan& plan, std::size_t n, RngStream& rng) {
  detail::require(n >= 1, "sample_paths: need at least one path");
  PathEnsemble ens;
  ens.grid = plan.grid;
  ens.provenance = rng.id();
  ens.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(plan.grid.size()));
  sample_cholesky_rows(plan.lower, rng, ens.values);
  return ens;
}

// --------------------------------------------------------------- circulant

/// Circulant embedding of the Toeplitz covariance r(|i-j| step), i,j < N.
struct CirculantPlan {
  std::size_t n = 0;
  double step = 0.0;
  std::vector<double> lag_cov;        // r(k step), k < N
  std::size_t m = 0;                  // embedding size (0 after fallback)
  std::vector<double> scale;          // sqrt(lambda_k / m)
  double min_eigenvalue = 0.0;
  std::shared_ptr<const fft::Plan> fft;
  bool fallback = false;              // embedding failed; Cholesky is used
  Eigen::MatrixXd lower;              // Toeplitz factor when fallback is set
};

inline constexpr double kEmbeddingTolerance = -1e-9;

inline CirculantPlan plan_circulant(const StationaryKernel& r, std::size_t n, double step,
                                    int max_doublings = 3) {
  detail::require(n >= 1, "circulant plan needs at least one point");
  detail::require(step > 0.0, "circulant plan needs a positive step");
  CirculantPlan plan;
  plan.n = n;
  plan.step = step;
  plan.lag_cov.resize(n);
  for (std::size_t k = 0; k < n; ++k) plan.lag_cov[k] = r(static_cast<double>(k) * step);

  std::size_t m = 2;
  while (m < 2 * (n - 1)) m *= 2;
  for (int attempt = 0; attempt <= max_doublings && n > 1; ++attempt, m *= 2) {
    auto dft = std::make_shared<const fft::Plan>(m);
    fft::Buffer row(m), eig(m);
    for (std::size_t k = 0; k <= m / 2; ++k) {
      const double v = k < n ? plan.lag_cov[k] : r(static_cast<double>(k) * step);
      row[k] = v;
      if (k > 0 && k < m / 2) row[m - k] = v;
    }
    dft->execute(row, eig);
    double lowest = numeric::kInf;
    for (std::size_t k = 0; k < m; ++k) lowest = std::min(lowest, eig[k].real());
    plan.min_eigenvalue = lowest;
    if (lowest >= kEmbeddingTolerance * std::max(1.0, plan.lag_cov[0])) {
      plan.m = m;
      plan.fft = std::move(dft);
      plan.scale.resize(m);
      for (std::size_t k = 0; k < m; ++k) {
        plan.scale[k] = std::sqrt(std::max(eig[k].real(), 0.0) / static_cast<double>(m));
      }
      return plan;
    }
  }
  // Recorded fallback: exact Cholesky of the Toeplitz matrix.
  plan.fallback = true;
  plan.m = 0;
  std::vector<double> lags(n);
  for (std::size_t k = 0; k < n; ++k) lags[k] = static_cast<double>(k) * step;
  Eigen::MatrixXd gram(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          plan.lag_cov[i > j ? i - j : j - i];
    }
  }
  plan.lower = linalg::factor_with_jitter(gram, lags).lower;
  return plan;
}

/// Per-thread scratch space for circulant sampling.
struct CirculantWorkspace {
  fft::Buffer in, out;
  explicit CirculantWorkspace(std::size_t m = 0) : in(m), out(m) {}
};

/// Fills `out` (count x N) with stationary sequences; one FFT yields two
/// independent rows (real and imaginary parts).
inline void sample_circulant_rows(const CirculantPlan& plan, RngStream& rng,
                                  Eigen::Ref<RowMatrix> out, CirculantWorkspace& ws) {
  const auto count = out.rows();
  if (plan.fallback || plan.n == 1) {
    if (plan.n == 1) {
      const double sd = std::sqrt(plan.lag_cov[0]);
      for (Eigen::Index i = 0; i < count; ++i) out(i, 0) = sd * rng.normal();
      return;
    }
    sample_cholesky_rows(plan.lower, rng, out);
    return;
  }
  if (ws.in.size() != plan.m) ws = CirculantWorkspace(plan.m);
  const auto n = static_cast<Eigen::Index>(plan.n);
  for (Eigen::Index i = 0; i < count; i += 2) {
    for (std::size_t k = 0; k < plan.m; ++k) {
      const double a = rng.normal();
      const double b = rng.normal();
      ws.in[k] = {plan.scale[k] * a, plan.scale[k] * b};
    }
    plan.fft->execute(ws.in, ws.out);
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = ws.out[static_cast<std::size_t>(j)].real();
    if (i + 1 < count) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out(i + 1, j) = ws.out[static_cast<std::size_t>(j)].imag();
      }
    }
  }
}

/// Stationary-side ensemble on a log-uniform grid; grid.times of the result
/// are log t values.
inline PathEnsemble circulant_sample(const StationaryKernel& r, const GridSpec& grid,
                                     std::size_t count, RngStream& rng) {
  detail::require(grid.layout == GridLayout::log_uniform,
                  "circulant_sample needs a log-uniform grid");
  PathEnsemble ens;
  ens.log_time = true;
  ens.provenance = rng.id();
  ens.grid = grid;
  for (double& t : ens.grid.times) t = std::log(t);
  ens.grid.times.back() = 0.0;
  ens.values.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(grid.size()));
  if (count == 0) return ens;
  const CirculantPlan plan = plan_circulant(r, grid.size(), grid.log_step());
  CirculantWorkspace ws;
  sample_circulant_rows(plan, rng, ens.values, ws);
  return ens;
}

/// X(t) = t^kappa X~(log t): maps a stationary-side ensemble back to (0, 1].
inline PathEnsemble lamperti_to_unit_interval(PathEnsemble stationary, double kappa) {
  detail::require(stationary.log_time, "lamperti_to_unit_interval expects log-time input");
  const auto cols = static_cast<Eigen::Index>(stationary.cols());
  for (Eigen::Index j = 0; j < cols; ++j) {
    const double s = stationary.grid.times[static_cast<std::size_t>(j)];
    detail::require(s <= 0.0, "lamperti_to_unit_interval: log times must be <= 0");
    stationary.values.col(j) *= std::exp(kappa * s);
    stationary.grid.times[static_cast<std::size_t>(j)] = std::exp(s);
  }
  stationary.log_time = false;
  return stationary;
}

// ------------------------------------------------------------- path model

/// Sampler for a Gaussian kernel on a fixed grid of (0, 1], with the
/// regression coefficients needed for exact single-coordinate conditioning.
class PathSampler {
 public:
  enum class Method { automatic, cholesky, circulant };

  PathSampler(const CovarianceKernel& kernel, GridSpec grid, Method method = Method::automatic)
      : kernel_(kernel), grid_(std::move(grid)) {
    if (method == Method::automatic) {
      method = grid_.layout == GridLayout::log_uniform && grid_.size() > 2 ? Method::circulant
                                                                          : Method::cholesky;
    }
    method_ = method;
    variance_.resize(grid_.size());
    for (std::size_t j = 0; j < grid_.size(); ++j) variance_[j] = kernel_(grid_[j], grid_[j]);
    if (method_ == Method::circulant) {
      detail::require(grid_.layout == GridLayout::log_uniform,
                      "circulant sampling needs a log-uniform grid");
      circulant_ = plan_circulant(lamperti_kernel(kernel_), grid_.size(), grid_.log_step());
      multiplier_.resize(grid_.size());
      for (std::size_t j = 0; j < grid_.size(); ++j) {
        multiplier_[j] = std::pow(grid_[j], kernel_.kappa());
      }
    } else {
      cholesky_ = plan_cholesky(kernel_, grid_);
    }
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const CovarianceKernel& kernel() const noexcept { return kernel_; }
  std::size_t size() const noexcept { return grid_.size(); }
  Method method() const noexcept { return method_; }
  bool fallback_used() const noexcept { return circulant_ && circulant_->fallback; }
  double variance(std::size_t j) const { return variance_[j]; }

  /// Fills every row of `out` (rows x N) with an independent path.
  void sample(RngStream& rng, Eigen::Ref<RowMatrix> out, CirculantWorkspace& ws) const {
    if (method_ == Method::cholesky) {
      sample_cholesky_rows(cholesky_->lower, rng, out);
      return;
    }
    sample_circulant_rows(*circulant_, rng, out, ws);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) *= multiplier_[static_cast<std::size_t>(j)];
    }
  }

  /// k_j = R(t_j, t_J) / R(t_J, t_J).
  void regression(std::size_t J, std::span<double> k) const {
    if (method_ == Method::circulant) {
      const double base = circulant_->lag_cov[0];
      for (std::size_t j = 0; j < grid_.size(); ++j) {
        const std::size_t lag = j > J ? j - J : J - j;
        k[j] = multiplier_[j] / multiplier_[J] * circulant_->lag_cov[lag] / base;
      }
      return;
    }
    for (std::size_t j = 0; j < grid_.size(); ++j) k[j] = kernel_(grid_[j], grid_[J]) / variance_[J];
  }

  /// Replaces X by X + k (v - X(t_J)), which has the law of X given X(t_J) = v.
  static void condition_row(std::span<double> row, std::span<const double> k, std::size_t J,
                            double v) {
    const double shift = v - row[J];
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += k[j] * shift;
    row[J] = v;
  }

 private:
  CovarianceKernel kernel_;
  GridSpec grid_;
  Method method_ = Method::cholesky;
  std::vector<double> variance_;
  std::optional<CholeskyPlan> cholesky_;
  std::optional<CirculantPlan> circulant_;
  std::vector<double> multiplier_;
};

inline PathEnsemble sample_paths(const PathSampler& sampler, std::size_t n, RngStream& rng) {
  PathEnsemble ens;
  ens.grid = sampler.grid();
  ens.provenance = rng.id();
  ens.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(sampler.size()));
  CirculantWorkspace ws;
  if (n > 0) sampler.sample(rng, ens.values, ws);
  return ens;
}

// ----------------------------------------------------------- skew-Gaussian

/// zeta = delta sqrt(sum_{i<=m} X_i^2) + sqrt(1 - delta^2) X_{m+1}.
inline PathEnsemble sample_skew(std::span<const PathEnsemble> components, double delta) {
  detail::require(components.size() >= 2, "sample_skew needs m + 1 >= 2 component ensembles");
  detail::require(delta >= 0.0 && delta <= 1.0, "sample_skew: delta must lie in [0, 1]");
  const PathEnsemble& last = components.back();
  for (const auto& c : components) {
    if (c.values.rows() != last.values.rows() || c.values.cols() != last.values.cols() ||
        c.grid.times != last.grid.times) {
      throw ShapeError("sample_skew: component ensembles must share grid and row count");
    }
  }
  PathEnsemble out;
  out.grid = last.grid;
  out.log_time = last.log_time;
  out.provenance = components.front().provenance;
  RowMatrix norm2 = RowMatrix::Zero(last.values.rows(), last.values.cols());
  for (std::size_t i = 0; i + 1 < components.size(); ++i) {
    norm2.array() += components[i].values.array().square();
  }
  out.values = delta * norm2.array().sqrt().matrix() + std::sqrt(1.0 - delta * delta) * last.values;
  return out;
}

// -------------------------------------------------------- order statistics

/// r-th largest of the rows at every grid time (r = 1: pointwise max).
template <class Matrix>
void order_statistic(const Matrix& values, std::size_t r, std::vector<double>& out) {
  const auto n = static_cast<std::size_t>(values.rows());
  const auto cols = static_cast<std::size_t>(values.cols());
  if (r < 1 || r > n) {
    std::ostringstream os;
    os << "order statistic index r=" << r << " outside [1, " << n << "]";
    throw InvalidParameter(os.str());
  }
  out.resize(cols);
  if (n == 1) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = values(0, static_cast<Eigen::Index>(j));
    return;
  }
  std::vector<double> column(n);
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(r - 1),
                     column.end(), std::greater<>());
    out[j] = column[r - 1];
  }
}

inline std::vector<double> order_statistic_path(const PathEnsemble& ensemble, std::size_t r) {
  std::vector<double> out;
  order_statistic(ensemble.values, r, out);
  return out;
}

// ----------------------------------------------------- conditional samplers

/// Paths distributed as X given X(1) > u: X(1) from the truncated normal,
/// the rest from the exact Gaussian conditional law given X(1).
inline PathEnsemble conditional_tail_ensemble(const CovarianceKernel& kernel, const GridSpec& grid,
                                              double u, std::size_t count, RngStream& rng) {
  if (u < -8.0) throw UnsupportedOperation("conditioning level below -8 is not supported");
  detail::require(!grid.times.empty() && grid.times.back() == 1.0,
                  "conditional_tail_ensemble: t = 1 must be a grid point");
  const PathSampler sampler(kernel, grid, PathSampler::Method::cholesky);
  PathEnsemble ens = sample_paths(sampler, count, rng);
  const std::size_t J = grid.size() - 1;
  std::vector<double> k(grid.size());
  sampler.regression(J, k);
  const double sd = std::sqrt(sampler.variance(J));
  for (std::size_t i = 0; i < count; ++i) {
    const double v = sd * rng.normal_above(u / sd);
    PathSampler::condition_row({ens.values.data() + i * grid.size(), grid.size()}, k, J, v);
  }
  return ens;
}

// ------------------------------------------------------------------- dumps

inline void write_ensemble_csv(const PathEnsemble& ens, std::ostream& os) {
  const auto old = os.precision(17);
  os << (ens.log_time ? "log_t" : "t");
  for (double t : ens.grid.times) os << ',' << t;
  os << '\n';
  for (std::size_t i = 0; i < ens.rows(); ++i) {
    os << i;
    for (double v : ens.row(i)) os << ',' << v;
    os << '\n';
  }
  os.precision(old);
}

}  // namespace ssx
