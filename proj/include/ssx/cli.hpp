#pragma once

// Command implementations behind the ssx executable.  Each command loads a
// config, applies flag overrides, writes the resolved config and version to
// the output directory and then its own result files.

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "ssx/asymptotics.hpp"
#include "ssx/conditions.hpp"
#include "ssx/config.hpp"
#include "ssx/error.hpp"
#include "ssx/functionals.hpp"
#include "ssx/harness.hpp"
#include "ssx/kernels.hpp"
#include "ssx/palm.hpp"
#include "ssx/parallel.hpp"
#include "ssx/pathsim.hpp"
#include "ssx/scaling.hpp"

namespace ssx::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kConfig = 2, kStrictFailure = 3 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  bool strict = false;
};

namespace detail {

namespace fs = std::filesystem;

inline std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw Error("cannot write " + (dir / name).string());
  return os;
}

// Flag > SSX_WORKERS > config value > hardware concurrency.
inline unsigned effective_workers(const Options& opt, unsigned from_config) {
  if (opt.workers) {
    if (*opt.workers == 0) throw ConfigError("--workers must be positive");
    return *opt.workers;
  }
  if (std::getenv(kWorkersEnv)) return resolve_workers(0);
  return resolve_workers(from_config);
}

struct Model {
  CovarianceKernel kernel;
  LocalExpansion expansion;
  ScalingScheme scheme;
};

inline Model model_of(const RunConfig& cfg) {
  const auto& p = cfg.experiment.process;
  CovarianceKernel kernel = [&] {
    try {
      return p.base_kernel();
    } catch (const InvalidParameter& e) {
      throw ConfigError(std::string("[process] ") + e.what());
    }
  }();
  if (p.delta < 0.0 || p.delta > 1.0) throw ConfigError("[process] delta must lie in [0, 1]");
  if (p.m < 1) throw ConfigError("[process] m must be at least 1");
  const LocalExpansion le = local_expansion(kernel);
  return {kernel, le, scaling_scheme_for(le.alpha, le.kappa)};
}

inline RunConfig prepare(const Options& opt, fs::path& dir) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{} : load_config(opt.config_path);
  if (opt.seed) cfg.experiment.seed = *opt.seed;
  if (opt.out) cfg.out = *opt.out;
  cfg.experiment.workers = effective_workers(opt, cfg.experiment.workers);
  const auto& e = cfg.experiment;
  if (e.n < 1 || e.r < 1 || e.r > e.n) throw ConfigError("[experiment] need 1 <= r <= n");
  if (e.batches == 0 || e.batch_size == 0) throw ConfigError("[experiment] batches and batch_size must be positive");
  dir = cfg.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  auto os = open_out(dir, "config.resolved.ini");
  write_resolved_config(cfg, os);
  auto vs = open_out(dir, "version.txt");
  vs << "ssx " << kVersion << '\n';
  return cfg;
}

inline ThetaConfig theta_config(const RunConfig& cfg) {
  ThetaConfig tc;
  tc.draws = cfg.theta.draws;
  tc.batch = cfg.theta.batch;
  tc.seed = cfg.experiment.seed;
  tc.workers = cfg.experiment.workers;
  tc.step = cfg.theta.step;
  tc.horizon = cfg.theta.horizon;
  tc.beyond_tol = cfg.theta.beyond_tol;
  tc.pilot = cfg.theta.pilot;
  return tc;
}

inline std::size_t theta_r(const RunConfig& cfg) { return cfg.theta.r ? cfg.theta.r : cfg.experiment.r; }
inline bool theta_r_mismatch(const RunConfig& cfg) { return cfg.theta.r && cfg.theta.r != cfg.experiment.r; }

inline ThetaEstimate run_theta_for(const RunConfig& cfg, const Model& m, std::vector<double> x_grid,
                                   double step_scale = 1.0) {
  ThetaConfig tc = theta_config(cfg);
  if (step_scale != 1.0) {
    const double h0 = tc.step > 0.0 ? tc.step
                                    : std::min(0.05, 0.2 * std::pow(m.expansion.D, -1.0 / m.expansion.alpha));
    tc.step = h0 * step_scale;
  }
  return estimate_theta(theta_r(cfg), m.expansion.alpha, m.expansion.D, m.expansion.kappa,
                        m.scheme.beta4, std::move(x_grid), tc);
}

inline void write_slope(const SlopeEstimate& s, const ThetaEstimate& est, std::ostream& os) {
  const auto old = os.precision(12);
  os << "r,theta_prime,stderr,x_used,closed_form\n";
  os << est.r << ',' << s.value << ',' << s.std_error << ',';
  for (std::size_t i = 0; i < s.x_used.size(); ++i) os << (i ? ";" : "") << s.x_used[i];
  os << ',';
  if (est.drift_only) os << theta_prime_case_b(est.kappa, est.r);
  os << '\n';
  os.precision(old);
}

// Two-column "x y" text for plotting tools.
template <class Get>
void write_xy(const fs::path& dir, const std::string& name, std::string_view label,
              const std::vector<ConvergenceRow>& rows, Get get) {
  auto os = open_out(dir, name);
  os.precision(10);
  os << "# u " << label << '\n';
  for (const auto& r : rows) os << r.u << ' ' << get(r) << '\n';
}

}  // namespace detail

inline int cmd_simulate(const Options& opt, std::ostream& log) {
  std::filesystem::path dir;
  const RunConfig cfg = detail::prepare(opt, dir);
  const auto m = detail::model_of(cfg);
  const ExperimentSpec& spec = cfg.experiment;
  const GridSpec grid = ssx::detail::experiment_grid(spec, m.kernel, m.expansion.alpha);
  ssx::detail::EnsembleSource src(spec.n, spec.process.delta, spec.process.m, m.kernel, grid);
  RngStream rng(spec.seed, 0, 0);
  RowMatrix block;
  CirculantWorkspace ws;
  std::vector<double> path;
  const auto& sim = cfg.simulate;
  if (sim.output == "ensemble") {
    PathEnsemble ens;
    ens.grid = grid;
    ens.provenance = rng.id();
    ens.values.resize(static_cast<Eigen::Index>(sim.paths), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < sim.paths; ++i) {
      src.draw(rng, block, ws);
      order_statistic(block, spec.r, path);
      for (std::size_t j = 0; j < path.size(); ++j) ens.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = path[j];
    }
    auto os = detail::open_out(dir, "ensemble.csv");
    write_ensemble_csv(ens, os);
  } else {
    const double uu = horizon_rescale(sim.u, spec.T, m.kernel.kappa());
    const double q = m.scheme.q(uu);
    auto os = detail::open_out(dir, "samples.csv");
    os.precision(17);
    os << "path," << sim.output << '\n';
    for (std::size_t i = 0; i < sim.paths; ++i) {
      src.draw(rng, block, ws);
      order_statistic(block, spec.r, path);
      const double v = sim.output == "sup" ? path_sup(path) : sojourn_time(path, grid.times, uu) / q;
      os << i << ',' << v << '\n';
    }
  }
  log << "simulate: " << sim.paths << " paths on " << grid.size() << " grid points -> " << dir.string() << '\n';
  return kOk;
}

inline int cmd_theta(const Options& opt, std::ostream& log) {
  std::filesystem::path dir;
  const RunConfig cfg = detail::prepare(opt, dir);
  const auto& xs = cfg.theta.x_grid;
  if (xs.empty() || xs.front() != 0.0) throw ConfigError("[theta] x_grid must start at 0");
  const auto m = detail::model_of(cfg);
  auto emit = [&](double scale, const std::string& suffix) {
    const ThetaEstimate est = detail::run_theta_for(cfg, m, xs, scale);
    auto os = detail::open_out(dir, "theta" + suffix + ".csv");
    write_theta_csv(est, os, est.drift_only);
    auto ds = detail::open_out(dir, "theta_prime" + suffix + ".csv");
    const SlopeEstimate s = theta_prime_at_zero(est);
    detail::write_slope(s, est, ds);
    log << "theta" << suffix << ": -Theta'(0) = " << s.value << " +- " << s.std_error
        << " (horizon " << est.horizon << ", step " << est.step << ")\n";
  };
  emit(1.0, "");
  if (cfg.theta.refine) emit(0.5, "_refined");
  return kOk;
}

inline int cmd_estimate_p(const Options& opt, std::ostream& log) {
  std::filesystem::path dir;
  const RunConfig cfg = detail::prepare(opt, dir);
  const auto m = detail::model_of(cfg);
  const PredictionSource source = parse_prediction(cfg.prediction);
  std::optional<SlopeEstimate> slope;
  if (source == PredictionSource::thm4) {
    if (cfg.theta_prime) {
      slope = SlopeEstimate{*cfg.theta_prime, cfg.theta_prime_stderr, {}};
    } else if (cfg.theta.present) {
      if (detail::theta_r_mismatch(cfg)) throw ConfigError("[theta] r must equal [experiment] r for thm4 predictions");
      const ThetaEstimate est = detail::run_theta_for(cfg, m, cfg.theta.x_grid);
      slope = theta_prime_at_zero(est);
      auto ds = detail::open_out(dir, "theta_prime.csv");
      detail::write_slope(*slope, est, ds);
    } else {
      throw ConfigError("prediction = thm4 needs [experiment] theta_prime or a [theta] section");
    }
  }
  const auto rows = convergence_table(cfg.experiment, source, slope);
  {
    auto os = detail::open_out(dir, "convergence.csv");
    write_convergence_csv(rows, os);
  }
  detail::write_xy(dir, "plot_ratio.dat", "ratio", rows, [](const ConvergenceRow& r) { return r.ratio; });
  detail::write_xy(dir, "plot_estimate.dat", "estimate", rows,
                   [](const ConvergenceRow& r) { return r.estimate.mean; });
  detail::write_xy(dir, "plot_prediction.dat", "prediction", rows,
                   [](const ConvergenceRow& r) { return r.prediction; });
  for (const auto& r : rows) {
    log << "u=" << r.u << " estimate=" << r.estimate.mean << " prediction=" << r.prediction
        << " ratio=" << r.ratio << (r.applicable ? "" : " (prediction not applicable)") << '\n';
  }
  return kOk;
}

inline int cmd_check_conditions(const Options& opt, std::ostream& log) {
  std::filesystem::path dir;
  const RunConfig cfg = detail::prepare(opt, dir);
  const auto m = detail::model_of(cfg);
  const auto& c = cfg.conditions;
  ProbeConfig pc;
  pc.samples = c.samples;
  pc.batch = c.batch;
  pc.seed = cfg.experiment.seed;
  pc.workers = cfg.experiment.workers;
  pc.delta = cfg.experiment.process.delta;
  pc.m = cfg.experiment.process.m;
  const LimitParams lp{m.expansion.alpha, m.expansion.D, m.expansion.kappa, m.scheme.beta4};
  bool any_fail = false;
  auto summary = detail::open_out(dir, "summary.txt");
  for (const auto& which : c.which) {
    ConditionReport rep;
    if (which == "A") {
      rep = cond_a_probe(m.kernel, m.scheme, c.a_levels, c.lags, lp, pc);
    } else if (which == "B") {
      rep = cond_b_tail(m.kernel, m.scheme, c.u, {c.d, 2.0 * c.d, 4.0 * c.d}, pc);
    } else if (which == "C") {
      rep = cond_c_ratio(m.kernel, m.scheme, c.u, {c.a, c.a / 2.0, c.a / 4.0}, c.sigma,
                         cfg.experiment.n, cfg.experiment.r, pc);
    } else {
      rep = cond_cstar_ratio(m.kernel, m.scheme, c.u, c.t, c.lambda, c.v, pc, c.rho, c.lambda0);
    }
    auto os = detail::open_out(dir, "condition_" + std::string(which == "C*" ? "Cstar" : which) + ".csv");
    write_condition_csv(rep, os);
    write_condition_summary(rep, summary);
    write_condition_summary(rep, log);
    any_fail = any_fail || rep.verdict == Verdict::fail;
  }
  return opt.strict && any_fail ? kStrictFailure : kOk;
}

inline int cmd_prop2(const Options& opt, std::ostream& log) {
  std::filesystem::path dir;
  const RunConfig cfg = detail::prepare(opt, dir);
  const auto m = detail::model_of(cfg);
  const auto& xs = cfg.experiment.x_grid;
  const std::size_t r = cfg.experiment.r;
  ThetaEstimate theta;
  const bool drift_only = drift_only_regime(m.expansion.alpha);
  if (cfg.theta.closed_form || (drift_only && !cfg.theta.present)) {
    if (!drift_only) throw ConfigError("[theta] closed_form needs a kernel with local exponent above 1");
    theta = theta_closed_form(m.expansion.kappa, r, xs);
  } else {
    if (detail::theta_r_mismatch(cfg)) throw ConfigError("[theta] r must equal [experiment] r for prop2");
    theta = detail::run_theta_for(cfg, m, xs);
  }
  ExperimentSpec spec = cfg.experiment;
  spec.functional = Functional::prop2_integral;
  const auto rows = prop2_bounds_check(spec, theta);
  auto os = detail::open_out(dir, "prop2.csv");
  write_prop2_csv(rows, os);
  std::size_t inside = 0;
  for (const auto& row : rows) inside += row.within ? 1 : 0;
  log << "prop2: " << inside << " of " << rows.size() << " cells inside the band\n";
  return kOk;
}

/// Dispatches `command`, mapping errors to exit codes.
inline int run(std::string_view command, const Options& opt, std::ostream& log, std::ostream& err) {
  try {
    if (command == "simulate") return cmd_simulate(opt, log);
    if (command == "estimate-p") return cmd_estimate_p(opt, log);
    if (command == "theta") return cmd_theta(opt, log);
    if (command == "check-conditions") return cmd_check_conditions(opt, log);
    if (command == "prop2") return cmd_prop2(opt, log);
    err << "error: unknown command '" << command << "'\n";
    return kConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace ssx::cli
