#pragma once

// Monte-Carlo experiment engine.  Batches of n-path ensembles are simulated
// on a shared grid, reduced to X_{r:n}, and turned into the sup
// probability, sojourn means or excess integrals.
//
// Two estimators are available for Gaussian processes: plain (independent
// ensembles) and palm (occupation-weighted ensembles, see palm.hpp), for
// which P(sup > u) = E[W] E_palm[1 / W] and
// E[(Y-x)^+] / E[Y] = E_palm[(Y-x)^+ / Y] with E[W] in closed form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ssx/asymptotics.hpp"
#include "ssx/error.hpp"
#include "ssx/functionals.hpp"
#include "ssx/grid.hpp"
#include "ssx/kernels.hpp"
#include "ssx/marginals.hpp"
#include "ssx/palm.hpp"
#include "ssx/parallel.hpp"
#include "ssx/pathsim.hpp"
#include "ssx/rng.hpp"
#include "ssx/scaling.hpp"
#include "ssx/stats.hpp"

namespace ssx {

struct ProcessConfig {
  std::string kernel = "fbm";
  double p1 = 0.5;     // H for fbm, h for bifbm/subfbm
  double p2 = 1.0;     // k for bifbm
  double delta = 0.0;  // skew weight; 0 is Gaussian
  int m = 1;           // chi degrees of freedom for skew

  bool gaussian() const { return delta == 0.0; }
  CovarianceKernel base_kernel() const { return standardized(make_kernel(kernel, p1, p2)); }
  MarginalLaw marginal() const { return gaussian() ? gaussian_marginal() : skew_marginal(delta, m); }
};

enum class Functional { sup_probability, sojourn, prop2_integral };
enum class EstimatorKind { plain, palm };

inline std::string_view to_string(Functional f) {
  switch (f) {
    case Functional::sup_probability: return "sup-probability";
    case Functional::sojourn: return "sojourn";
    case Functional::prop2_integral: return "prop2-integral";
  }
  return "";
}

inline Functional parse_functional(std::string_view s) {
  if (s == "sup-probability") return Functional::sup_probability;
  if (s == "sojourn") return Functional::sojourn;
  if (s == "prop2-integral") return Functional::prop2_integral;
  throw InvalidParameter("unknown functional '" + std::string(s) + "'");
}

inline EstimatorKind parse_estimator(std::string_view s) {
  if (s == "plain") return EstimatorKind::plain;
  if (s == "palm") return EstimatorKind::palm;
  throw InvalidParameter("unknown estimator '" + std::string(s) + "'");
}

struct ExperimentSpec {
  ProcessConfig process;
  std::size_t n = 1;
  std::size_t r = 1;
  std::vector<double> u = {2.0, 2.5, 3.0, 3.5, 4.0};
  GridLayout layout = GridLayout::log_uniform;
  std::size_t grid_N = 0;  // 0: last step q(u_max)/8
  double t_min = 1e-3;
  double T = 1.0;
  Functional functional = Functional::sup_probability;
  EstimatorKind estimator = EstimatorKind::plain;
  std::vector<double> x_grid = {0.0, 0.2, 0.5, 1.0};  // prop2 integral levels
  std::size_t batches = 16;
  std::size_t batch_size = 4096;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::size_t memory_limit = std::size_t{1} << 30;  // bytes per run

  std::size_t total_samples() const { return batches * batch_size; }
};

struct LevelResult {
  double u = 0.0;          // level on the time horizon [0, T]
  double u_unit = 0.0;     // equivalent level on [0, 1]
  MCEstimate estimate;     // p_r(u) or E[L_r(u)]
  std::vector<RatioEstimate> excess;  // prop2 integrals on x_grid
  std::size_t inconsistent = 0;       // sup above u with zero sojourn
  std::size_t grid_N = 0;
};

namespace detail {

inline double local_alpha(const CovarianceKernel& k) { return local_expansion(k).alpha; }

inline GridSpec experiment_grid(const ExperimentSpec& spec, const CovarianceKernel& kernel,
                                double alpha) {
  if (spec.grid_N > 0) return make_grid(spec.layout, spec.grid_N, spec.t_min);
  const ScalingScheme scheme = scaling_scheme_for(alpha, kernel.kappa());
  double u_max = 0.0;
  for (double u : spec.u) u_max = std::max(u_max, horizon_rescale(u, spec.T, kernel.kappa()));
  const double step = scheme.q(u_max) / 8.0;
  if (spec.layout == GridLayout::log_uniform) return default_grid_for(step, spec.t_min);
  return make_grid(GridLayout::uniform, static_cast<std::size_t>(std::ceil(1.0 / step)));
}

struct BatchOutput {
  std::vector<Moments> value;                      // per level
  std::vector<std::vector<RatioMoments>> excess;   // plain prop2: per level, per x
  std::vector<std::vector<Moments>> palm_excess;   // palm prop2: per level, per x
  std::vector<std::size_t> inconsistent;
};

}  // namespace detail

inline std::size_t memory_bound_bytes(const ExperimentSpec& spec, std::size_t grid_N) {
  const std::size_t parts = spec.process.gaussian() ? 1 : static_cast<std::size_t>(spec.process.m + 1);
  return grid_N * spec.n * parts * spec.batch_size * sizeof(double);
}

/// Estimates the experiment's functional at every level.  Levels refer to the
/// horizon [0, T]; they are mapped to [0, 1] by self-similarity.
inline std::vector<LevelResult> run_experiment(const ExperimentSpec& spec) {
  check_order(spec.n, spec.r);
  detail::require(!spec.u.empty(), "experiment needs at least one level");
  detail::require(spec.batches > 0 && spec.batch_size > 0, "experiment budget must be positive");
  const CovarianceKernel kernel = spec.process.base_kernel();
  const double alpha = detail::local_alpha(kernel);
  const GridSpec grid = detail::experiment_grid(spec, kernel, alpha);
  const std::size_t bytes = memory_bound_bytes(spec, grid.size());
  if (bytes > spec.memory_limit) {
    std::ostringstream os;
    os << "batch memory bound " << bytes << " bytes (N=" << grid.size() << ", n=" << spec.n
       << ", batch=" << spec.batch_size << ") exceeds the limit of " << spec.memory_limit;
    throw ResourceError(os.str());
  }
  const bool palm = spec.estimator == EstimatorKind::palm;
  if (palm && !spec.process.gaussian()) {
    throw UnsupportedOperation("the palm estimator needs a Gaussian process");
  }
  const ScalingScheme scheme = scaling_scheme_for(alpha, kernel.kappa());
  const std::size_t levels = spec.u.size();
  std::vector<double> u_unit(levels), q(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    u_unit[l] = horizon_rescale(spec.u[l], spec.T, kernel.kappa());
    q[l] = scheme.q(u_unit[l]);
  }
  const std::vector<double> cells = grid.cell_lengths();

  detail::EnsembleSource probe(spec.n, spec.process.delta, spec.process.m, kernel, grid);
  std::vector<detail::PalmLevel> palm_levels;
  if (palm) {
    for (std::size_t l = 0; l < levels; ++l) {
      std::vector<double> weight = cells;
      // For the sup probability every grid point, including the first,
      // must carry weight so that {W > 0} = {sup > u}.
      if (spec.functional == Functional::sup_probability) weight[0] = grid[0];
      palm_levels.push_back(detail::palm_level(probe.sampler(), u_unit[l], spec.n, spec.r, weight));
    }
  }

  const std::size_t nx = spec.x_grid.size();
  auto batch_fn = [&](std::size_t b) {
    detail::BatchOutput out;
    out.value.assign(levels, {});
    out.excess.assign(levels, std::vector<RatioMoments>(nx));
    out.palm_excess.assign(levels, std::vector<Moments>(nx));
    out.inconsistent.assign(levels, 0);
    detail::EnsembleSource src(spec.n, spec.process.delta, spec.process.m, kernel, grid);
    RngStream rng(spec.seed, static_cast<std::uint32_t>(b), 0);
    RowMatrix block;
    CirculantWorkspace ws;
    std::vector<double> path, k;
    for (std::size_t e = 0; e < spec.batch_size; ++e) {
      if (!palm) {
        src.draw(rng, block, ws);
        order_statistic(block, spec.r, path);
        const double sup = path_sup(path);
        for (std::size_t l = 0; l < levels; ++l) {
          const double L = sojourn_time(path, grid.times, u_unit[l]);
          if (sup_sojourn_inconsistent(path, u_unit[l], L)) ++out.inconsistent[l];
          switch (spec.functional) {
            case Functional::sup_probability:
              out.value[l].add(sup > u_unit[l] ? 1.0 : 0.0);
              break;
            case Functional::sojourn:
              out.value[l].add(L);
              break;
            case Functional::prop2_integral: {
              const double Y = L / q[l];
              out.value[l].add(L);
              for (std::size_t i = 0; i < nx; ++i) {
                out.excess[l][i].add(std::max(Y - spec.x_grid[i], 0.0), Y);
              }
              break;
            }
          }
        }
        continue;
      }
      for (std::size_t l = 0; l < levels; ++l) {
        const auto& lvl = palm_levels[l];
        detail::palm_draw(rng, src, lvl, u_unit[l], spec.n, spec.r, block, k, ws);
        order_statistic(block, spec.r, path);
        double W = 0.0;
        for (std::size_t j = 0; j < path.size(); ++j) {
          if (path[j] > u_unit[l]) W += lvl.weight[j];
        }
        switch (spec.functional) {
          case Functional::sup_probability:
            out.value[l].add(lvl.mean_w / W);
            break;
          case Functional::sojourn:
            out.value[l].add(lvl.mean_w);
            break;
          case Functional::prop2_integral: {
            const double Y = W / q[l];
            out.value[l].add(lvl.mean_w);
            for (std::size_t i = 0; i < nx; ++i) {
              out.palm_excess[l][i].add(std::max(Y - spec.x_grid[i], 0.0) / Y);
            }
            break;
          }
        }
      }
    }
    return out;
  };

  const auto parts = run_batches<detail::BatchOutput>(spec.batches, resolve_workers(spec.workers), batch_fn);
  std::vector<LevelResult> results(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    Moments value;
    std::vector<RatioMoments> excess(nx);
    std::vector<Moments> palm_excess(nx);
    std::size_t inconsistent = 0;
    for (const auto& p : parts) {
      value.merge(p.value[l]);
      for (std::size_t i = 0; i < nx; ++i) {
        excess[i].merge(p.excess[l][i]);
        palm_excess[i].merge(p.palm_excess[l][i]);
      }
      inconsistent += p.inconsistent[l];
    }
    LevelResult& res = results[l];
    res.u = spec.u[l];
    res.u_unit = u_unit[l];
    res.estimate = value.estimate();
    res.inconsistent = inconsistent;
    res.grid_N = grid.size();
    if (spec.functional == Functional::prop2_integral) {
      for (std::size_t i = 0; i < nx; ++i) {
        if (spec.x_grid[i] == 0.0) {
          res.excess.push_back({1.0, 0.0});
        } else if (palm) {
          res.excess.push_back({palm_excess[i].mean(), palm_excess[i].std_error()});
        } else {
          if (excess[i].sb == 0.0) throw UndefinedRatio("excess_integral: all sojourn samples are zero");
          res.excess.push_back({excess[i].ratio(), excess[i].std_error()});
        }
      }
    }
  }
  return results;
}

// --------------------------------------------------------- convergence table

enum class PredictionSource { thm3, thm4, prop1_tail };

inline PredictionSource parse_prediction(std::string_view s) {
  if (s == "thm3") return PredictionSource::thm3;
  if (s == "thm4") return PredictionSource::thm4;
  if (s == "prop1-tail" || s == "prop1") return PredictionSource::prop1_tail;
  throw InvalidParameter("unknown prediction source '" + std::string(s) + "'");
}

struct ConvergenceRow {
  double u = 0.0;
  MCEstimate estimate;
  double prediction = 0.0;
  double ratio = 0.0;
  double ratio_err = 0.0;
  std::size_t grid_N = 0;
  std::uint64_t seed = 0;
  bool applicable = true;
};

/// Rows of estimate / prediction over the experiment's levels (sorted by u).
/// prop1-tail needs no simulation: estimate is the exact order tail and the
/// prediction its leading binomial term.
inline std::vector<ConvergenceRow> convergence_table(ExperimentSpec spec, PredictionSource source,
                                                     std::optional<SlopeEstimate> theta_prime = {}) {
  std::sort(spec.u.begin(), spec.u.end());
  const CovarianceKernel kernel = spec.process.base_kernel();
  const MarginalLaw marginal = spec.process.marginal();
  std::vector<ConvergenceRow> rows;
  if (source == PredictionSource::prop1_tail) {
    for (double u : spec.u) {
      const double uu = horizon_rescale(u, spec.T, kernel.kappa());
      ConvergenceRow row;
      row.u = u;
      row.estimate = MCEstimate::make(order_tail_exact(uu, spec.n, spec.r, marginal), 0.0, 0);
      row.prediction = order_tail_asymptotic(uu, spec.n, spec.r, marginal).value;
      row.ratio = row.estimate.mean / row.prediction;
      row.seed = spec.seed;
      rows.push_back(row);
    }
    return rows;
  }
  if (source == PredictionSource::thm4 && !theta_prime) {
    throw ConfigError("thm4 predictions need an estimate of -Theta'(0)");
  }
  spec.functional = Functional::sup_probability;
  const auto results = run_experiment(spec);
  const double alpha = detail::local_alpha(kernel);
  const ScalingScheme scheme = scaling_scheme_for(alpha, kernel.kappa());
  for (const auto& res : results) {
    ConvergenceRow row;
    row.u = res.u;
    row.estimate = res.estimate;
    row.grid_N = res.grid_N;
    row.seed = spec.seed;
    double pred_se = 0.0;
    if (source == PredictionSource::thm4) {
      const Prediction p = p_prediction_thm4(res.u_unit, spec.n, spec.r, marginal, kernel.kappa(),
                                             scheme, theta_prime->value);
      row.prediction = p.value;
      row.applicable = p.applicable;
      pred_se = p.value * theta_prime->std_error / theta_prime->value;
    } else {
      const Prediction p = p_prediction_thm3(res.u_unit, spec.n, spec.r, marginal, scheme);
      row.prediction = p.value;
      row.applicable = p.applicable;
    }
    row.ratio = row.estimate.mean / row.prediction;
    row.ratio_err = ratio_std_error(row.estimate.mean, row.estimate.std_error, row.prediction, pred_se);
    rows.push_back(row);
  }
  return rows;
}

inline void write_convergence_csv(const std::vector<ConvergenceRow>& rows, std::ostream& os) {
  const auto old = os.precision(10);
  os << "u,estimate,stderr,prediction,ratio,ratio_err,n_samples,grid_N,seed\n";
  for (const auto& r : rows) {
    os << r.u << ',' << r.estimate.mean << ',' << r.estimate.std_error << ',' << r.prediction << ','
       << r.ratio << ',' << r.ratio_err << ',' << r.estimate.n_samples << ',' << r.grid_N << ','
       << r.seed << '\n';
  }
  os.precision(old);
}

// ------------------------------------------------------- excess-integral band

/// Theta_r(x) = e^{-kappa r x} as an estimate without sampling error.
inline ThetaEstimate theta_closed_form(double kappa, std::size_t r, std::vector<double> x_grid) {
  ThetaEstimate est;
  est.r = r;
  est.kappa = kappa;
  est.alpha = 2.0;
  est.beta4 = 1.0;
  est.drift_only = true;
  est.x = std::move(x_grid);
  for (double x : est.x) {
    est.theta.push_back(theta_case_b(x, kappa, r));
    est.theta_left.push_back(theta_case_b(x, kappa, r));
    est.std_error.push_back(0.0);
  }
  est.mean_occupation = 1.0 / (kappa * static_cast<double>(r));
  return est;
}

struct Prop2Row {
  double u = 0.0;
  double x = 0.0;
  RatioEstimate excess;
  double theta = 0.0;
  double theta_left = 0.0;
  double epsilon = 0.0;  // combined standard error
  double lower = 0.0;
  double upper = 0.0;
  bool within = false;
};

/// Checks the excess integral of normalized sojourns against
/// [Theta(x) - 3 eps, Theta(x-) + 3 eps] at every x of the Theta estimate.
inline std::vector<Prop2Row> prop2_bounds_check(ExperimentSpec spec, const ThetaEstimate& theta) {
  spec.functional = Functional::prop2_integral;
  spec.x_grid = theta.x;
  const auto results = run_experiment(spec);
  std::vector<Prop2Row> rows;
  for (const auto& res : results) {
    for (std::size_t i = 0; i < theta.x.size(); ++i) {
      Prop2Row row;
      row.u = res.u;
      row.x = theta.x[i];
      row.excess = res.excess[i];
      row.theta = theta.theta[i];
      row.theta_left = theta.theta_left[i];
      row.epsilon = std::hypot(row.excess.std_error, theta.std_error[i]);
      row.lower = row.theta - 3.0 * row.epsilon;
      row.upper = row.theta_left + 3.0 * row.epsilon;
      row.within = row.excess.value >= row.lower && row.excess.value <= row.upper;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_prop2_csv(const std::vector<Prop2Row>& rows, std::ostream& os) {
  const auto old = os.precision(10);
  os << "u,x,excess,excess_stderr,theta,theta_left,epsilon,lower,upper,within\n";
  for (const auto& r : rows) {
    os << r.u << ',' << r.x << ',' << r.excess.value << ',' << r.excess.std_error << ',' << r.theta
       << ',' << r.theta_left << ',' << r.epsilon << ',' << r.lower << ',' << r.upper << ','
       << (r.within ? 1 : 0) << '\n';
  }
  os.precision(old);
}

}  // namespace ssx
