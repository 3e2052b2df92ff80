// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ssx/asymptotics.hpp"
#include "ssx/conditions.hpp"
#include "ssx/harness.hpp"
#include "ssx/kernels.hpp"
#include "ssx/marginals.hpp"
#include "ssx/pathsim.hpp"
#include "ssx/rng.hpp"
#include "ssx/scaling.hpp"

using namespace ssx;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

// |v - 1| strictly shrinking along v.
bool approaches_one(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(std::abs(v[i] - 1.0) < std::abs(v[i - 1] - 1.0))) return false;
  }
  return true;
}

// |v - 1| non-increasing within 2 joint stderr, and a net improvement.
bool approaches_one(const std::vector<double>& v, const std::vector<double>& se) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i] - 1.0) - std::abs(v[i - 1] - 1.0) > 2.0 * std::hypot(se[i], se[i - 1])) return false;
  }
  return std::abs(v.back() - 1.0) < std::abs(v.front() - 1.0);
}

ExperimentSpec brownian(std::vector<double> u) {
  ExperimentSpec spec;
  spec.process.kernel = "fbm";
  spec.process.p1 = 0.5;
  spec.u = std::move(u);
  return spec;
}

// ------------------------------------------------------------------ 1

void criterion1(Outcome& o) {
  const auto g = gaussian_marginal();
  const double u4 = g.upper_quantile(1e-4);
  double lo = 1.0, hi = 0.0;
  for (std::size_t n = 1; n <= 5; ++n) {
    for (std::size_t r = 1; r <= n; ++r) {
      const double ratio = order_tail_exact(u4, n, r, g) / order_tail_asymptotic(u4, n, r, g).value;
      // Independent value from the binomial sum at G-bar = 1e-4.
      const double ref = oracle::binomial_tail(oracle::Phi_bar(u4), int(n), int(r)) /
                         (std::tgamma(n + 1.0) / (std::tgamma(r + 1.0) * std::tgamma(n - r + 1.0)) *
                          std::pow(oracle::Phi_bar(u4), double(r)));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      o.require(ratio >= 0.995 && ratio <= 1.0, "ratio n=" + std::to_string(n) + " r=" + std::to_string(r));
      o.require(std::abs(ratio - ref) < 1e-9, "oracle n=" + std::to_string(n) + " r=" + std::to_string(r));
      double prev = 0.0;
      for (double p : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
        const double u = g.upper_quantile(p);
        const double q = order_tail_exact(u, n, r, g) / order_tail_asymptotic(u, n, r, g).value;
        o.require(q >= prev - 1e-12, "monotone n=" + std::to_string(n) + " r=" + std::to_string(r));
        prev = q;
      }
    }
  }
  o.detail << " ratio range at G-bar=1e-4: [" << lo << ", " << hi << "]";
}

// ------------------------------------------------------------------ 2

void criterion2(Outcome& o) {
  const auto g = gaussian_marginal();
  for (double H : {0.5, 0.75}) {
    for (std::size_t nr : {1u, 2u}) {
      std::vector<double> ratios;
      for (double u : {2.0, 3.0, 4.0, 5.0}) {
        const double exact = mean_sojourn_exact(u, nr, nr, g, H);
        if (H == 0.5 && nr == 1) o.require(std::abs(exact / oracle::brownian_mean_sojourn(u) - 1.0) < 1e-6, "closed form");
        if (nr == 2) {
          const double ref = oracle::mean_sojourn_quadrature(u, 2, 2, H);
          o.require(std::abs(exact / ref - 1.0) < 1e-4, "quadrature oracle");
        }
        ratios.push_back(exact / mean_sojourn_asymptotic(u, nr, nr, g, H));
      }
      const double at4 = ratios[2];
      o.detail << " fbm(" << H << ") n=r=" << nr << ": u=2..5 ratios";
      for (double r : ratios) o.detail << ' ' << r;
      o.require(at4 >= 0.85 && at4 <= 1.15, "u=4 band");
      o.require(approaches_one(ratios), "monotone approach");
    }
  }
}

// ------------------------------------------------------------------ 3

void criterion3(Outcome& o) {
  ThetaConfig cfg;
  cfg.draws = 1000000;
  cfg.seed = 303;
  for (double kappa : {0.25, 0.5}) {
    for (std::size_t r : {1u, 2u, 3u}) {
      const double lambda = kappa * static_cast<double>(r);
      std::vector<double> x = {0.0};
      for (int k = 1; k <= 5; ++k) x.push_back(0.003 * k / lambda);
      for (double v : {0.2, 0.5, 1.0}) x.push_back(v);
      std::sort(x.begin(), x.end());
      const auto est = estimate_theta(r, 1.5, 0.5, kappa, 1.0, x, cfg);
      o.require(est.drift_only, "drift-only path");
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != 0.2 && x[i] != 0.5 && x[i] != 1.0) continue;
        const double ref = oracle::theta_drift_only(x[i], kappa, int(r));
        const double z = (est.theta[i] - ref) / est.std_error[i];
        o.require(std::abs(z) <= 3.0, "theta kappa=" + std::to_string(kappa) + " r=" + std::to_string(r));
      }
      const auto slope = theta_prime_at_zero(est);
      const double rel = slope.value / lambda - 1.0;
      o.detail << " k=" << kappa << ",r=" << r << ": slope rel.err " << rel;
      o.require(std::abs(rel) <= 0.02, "slope kappa=" + std::to_string(kappa) + " r=" + std::to_string(r));
    }
  }
}

// ------------------------------------------------------------------ 4

SlopeEstimate brownian_slope(std::size_t r, std::uint64_t seed) {
  ThetaConfig cfg;
  cfg.draws = 400000;
  cfg.step = 0.01;
  cfg.seed = seed;
  const std::vector<double> x = {0.0, 0.02, 0.04, 0.06, 0.08, 0.1};
  return theta_prime_at_zero(estimate_theta(r, 1.0, 0.5, 0.5, 1.0, x, cfg));
}

void criterion4(Outcome& o) {
  const auto slope = brownian_slope(1, 404);
  auto spec = brownian({2.5, 3.0, 3.5, 4.0});
  spec.grid_N = 8192;
  spec.batches = 250;
  spec.batch_size = 4000;
  spec.seed = 404;
  const auto rows = convergence_table(spec, PredictionSource::thm4, slope);
  std::vector<double> mc, mc_se, exact;
  o.detail << " -Theta'(0)=" << slope.value << "+-" << slope.std_error << ";";
  for (const auto& row : rows) {
    const double e = oracle::brownian_sup_tail(row.u) / row.prediction;
    mc.push_back(row.ratio);
    mc_se.push_back(row.ratio_err);
    exact.push_back(e);
    o.detail << " u=" << row.u << ": mc " << row.ratio << "+-" << row.ratio_err << " exact " << e;
  }
  o.require(mc.back() >= 0.85 && mc.back() <= 1.15, "MC ratio at u=4");
  o.require(exact.back() >= 0.85 && exact.back() <= 1.15, "exact ratio at u=4");
  o.require(approaches_one(mc, mc_se), "MC trend");
  o.require(approaches_one(exact), "exact trend");
}

// ------------------------------------------------------------------ 5

void criterion5(Outcome& o) {
  const auto slope = brownian_slope(2, 505);
  auto spec = brownian({3.0});
  spec.n = 2;
  spec.r = 2;
  spec.estimator = EstimatorKind::palm;
  spec.batches = 16;
  spec.batch_size = 4096;
  spec.seed = 505;
  const auto row = convergence_table(spec, PredictionSource::thm4, slope).front();
  const double g2 = std::pow(oracle::Phi_bar(3.0), 2);
  const double tol = 3.0 * row.estimate.std_error + 0.15 * row.prediction;
  o.detail << " -Theta_2'(0)=" << slope.value << "; p_2(3)=" << row.estimate.mean << "+-"
           << row.estimate.std_error << " prediction " << row.prediction << " G-bar_2 " << g2;
  o.require(std::abs(row.estimate.mean - row.prediction) <= tol, "agreement with prediction");
  o.require(row.estimate.mean / g2 > 1.0, "p_2 / G-bar_2 > 1");
}

// ------------------------------------------------------------------ 6

void criterion6(Outcome& o) {
  ExperimentSpec spec;
  spec.process.kernel = "fbm";
  spec.process.p1 = 0.75;
  spec.u = {4.0};
  spec.estimator = EstimatorKind::palm;
  spec.batches = 16;
  spec.batch_size = 4096;
  spec.seed = 606;
  const auto rows = prop2_bounds_check(spec, theta_closed_form(0.75, 1, {0.2, 0.5, 1.0}));
  for (const auto& row : rows) {
    o.require(std::abs(row.theta - std::exp(-0.75 * row.x)) < 1e-15, "closed form");
    o.detail << " x=" << row.x << ": " << row.excess.value << "+-" << row.excess.std_error << " in ["
             << row.lower << ", " << row.upper << "]";
    o.require(row.within, "band at x=" + std::to_string(row.x));
  }
}

// ------------------------------------------------------------------ 7

void criterion7(Outcome& o) {
  std::vector<double> times;
  for (int i = 1; i <= 40; ++i) times.push_back(i / 40.0);
  auto sub_D = [](double h) { return 0.5 / (2.0 - std::pow(2.0, 2.0 * h - 1.0)); };
  struct Case {
    CovarianceKernel kernel;
    double D, alpha;
  };
  const std::vector<Case> cases = {
      {standardized(bifbm_kernel(0.7, 0.8)), std::pow(2.0, -0.8), 1.12},
      {standardized(subfbm_kernel(0.3)), sub_D(0.3), 0.6},
      {standardized(fbm_kernel(0.75)), 0.5, 1.5},
  };
  for (const auto& c : cases) {
    const std::string name = c.kernel.describe();
    o.require(psd_jitter(c.kernel, times) <= 1e-10, "PSD " + name);
    o.require(self_similarity_defect(c.kernel) < 1e-12, "self-similarity " + name);
    o.require(lamperti_stationarity_defect(c.kernel) < 1e-12, "Lamperti " + name);
    const auto le = local_expansion(c.kernel);
    o.require(std::abs(le.D / c.D - 1.0) <= 0.01, "D " + name);
    o.require(std::abs(le.alpha / c.alpha - 1.0) <= 0.01, "alpha " + name);
  }
  const double delta = 0.5, u = 3.0;
  const int m = 2;
  const double p = skew_marginal(delta, m).tail(u);
  o.require(std::abs(p / oracle::skew_tail(u, delta, m) - 1.0) < 1e-7, "skew quadrature oracle");
  RngStream rng(707, 0, 0);
  const long n = 10000000;
  long hits = 0;
  for (long i = 0; i < n; ++i) {
    double s2 = 0.0;
    for (int k = 0; k < m; ++k) {
      const double z = rng.normal();
      s2 += z * z;
    }
    hits += delta * std::sqrt(s2) + std::sqrt(1.0 - delta * delta) * rng.normal() > u ? 1 : 0;
  }
  const double mc = static_cast<double>(hits) / n;
  const double se = std::sqrt(mc * (1.0 - mc) / n);
  o.detail << " skew tail " << p << " vs MC " << mc << "+-" << se;
  o.require(std::abs(mc - p) <= 3.0 * se, "skew MC");
}

// ------------------------------------------------------------------ 8

void criterion8(Outcome& o) {
  const auto kernel = standardized(fbm_kernel(0.5));
  const auto scheme = scaling_scheme_for(1.0, 0.5);
  ProbeConfig cfg;
  cfg.samples = 100000;
  cfg.batch = 5000;
  cfg.seed = 808;

  const auto a = cond_a_probe(kernel, scheme, {3.0, 4.0, 5.0}, {1.0}, LimitParams{}, cfg);
  std::vector<double> gap, gap_se;
  for (const auto& c : a.cells) {
    gap.push_back(std::abs(c.gap));
    gap_se.push_back(std::hypot(c.observed_se, c.reference_se));
  }
  const Verdict a_trend = detail::decreasing_verdict(gap, gap_se);
  o.detail << " A |gap|";
  for (double g : gap) o.detail << ' ' << g;
  o.require(a_trend == Verdict::pass, "A trend");

  const auto b = cond_b_tail(kernel, scheme, 4.0, {1.0, 2.0, 4.0, 8.0}, cfg);
  o.detail << "; B " << to_string(b.verdict);
  o.require(b.verdict == Verdict::pass, "B");

  for (double sigma : {0.1, 1.0}) {
    ProbeConfig cc = cfg;
    cc.samples = 400000;
    const auto c = cond_c_ratio(kernel, scheme, 3.0, {0.5, 0.25, 0.125}, sigma, 1, 1, cc);
    o.detail << "; C(sigma=" << sigma << ")";
    for (const auto& cell : c.cells) o.detail << ' ' << cell.observed << "+-" << cell.observed_se;
    o.require(c.verdict == Verdict::pass, "C sigma=" + std::to_string(sigma));
  }

  const auto cs = cond_cstar_ratio(kernel, scheme, 4.0, {0.001, 0.004, 0.016, 0.064}, {0.25, 0.5, 1.0}, 0.5);
  o.detail << "; C* d=" << cs.fitted_d;
  o.require(cs.fitted_d > 1.0, "C* exponent");
}

// ------------------------------------------------------------------ 9

void criterion9(Outcome& o) {
  auto check = [&](const std::string& name, const std::function<std::string(unsigned)>& produce) {
    const std::string ref = produce(1);
    bool same = !ref.empty();
    for (unsigned w : {1u, 4u, 16u}) same = same && produce(w) == ref;
    o.require(same, name);
  };
  check("convergence csv", [](unsigned w) {
    auto spec = brownian({2.0, 3.0});
    spec.grid_N = 512;
    spec.batches = 8;
    spec.batch_size = 1024;
    spec.workers = w;
    std::ostringstream os;
    write_convergence_csv(convergence_table(spec, PredictionSource::thm3), os);
    return os.str();
  });
  check("palm prop2 csv", [](unsigned w) {
    auto spec = brownian({3.0});
    spec.estimator = EstimatorKind::palm;
    spec.batches = 8;
    spec.batch_size = 512;
    spec.workers = w;
    std::ostringstream os;
    write_prop2_csv(prop2_bounds_check(spec, theta_closed_form(0.5, 1, {0.0, 0.5, 1.0})), os);
    return os.str();
  });
  check("theta csv", [](unsigned w) {
    ThetaConfig cfg;
    cfg.draws = 20000;
    cfg.pilot = 4000;
    cfg.workers = w;
    std::ostringstream os;
    write_theta_csv(estimate_theta(1, 1.0, 0.5, 0.5, 1.0, {0.0, 0.1, 0.5}, cfg), os, false);
    return os.str();
  });
  check("condition csv", [](unsigned w) {
    ProbeConfig cfg;
    cfg.samples = 8000;
    cfg.batch = 1000;
    cfg.workers = w;
    const auto kernel = standardized(fbm_kernel(0.5));
    const auto scheme = scaling_scheme_for(1.0, 0.5);
    std::ostringstream os;
    write_condition_csv(cond_a_probe(kernel, scheme, {3.0, 4.0}, {1.0}, LimitParams{}, cfg), os);
    write_condition_csv(cond_b_tail(kernel, scheme, 4.0, {2.0, 4.0}, cfg), os);
    return os.str();
  });
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<void(Outcome&)>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    Outcome o;
    try {
      run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << o.detail.str() << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (9 - failed) << "/9 criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}
