#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "ssx/kernels.hpp"
#include "ssx/linalg.hpp"
#include "ssx/marginals.hpp"
#include "ssx/rng.hpp"
#include "ssx/scaling.hpp"
#include "ssx/stats.hpp"

using namespace ssx;

namespace {

std::vector<double> probe_times() {
  std::vector<double> t;
  for (int i = 1; i <= 40; ++i) t.push_back(i / 40.0);
  return t;
}

struct ExpansionCase {
  CovarianceKernel kernel;
  double D;
  double alpha;
};

std::vector<ExpansionCase> expansion_cases() {
  // D of the standardized kernel, from the covariance near t = 1.
  auto sub_D = [](double h) { return 0.5 / (2.0 - std::pow(2.0, 2.0 * h - 1.0)); };
  return {
      {standardized(fbm_kernel(0.5)), 0.5, 1.0},
      {standardized(fbm_kernel(0.3)), 0.5, 0.6},
      {standardized(fbm_kernel(0.75)), 0.5, 1.5},
      {standardized(bifbm_kernel(0.5, 0.5)), std::pow(2.0, -0.5), 0.5},
      {standardized(bifbm_kernel(0.7, 0.8)), std::pow(2.0, -0.8), 1.12},
      {standardized(subfbm_kernel(0.3)), sub_D(0.3), 0.6},
      {standardized(subfbm_kernel(0.7)), sub_D(0.7), 1.4},
  };
}

}  // namespace

TEST(Kernels, MatchIndependentFormulas) {
  for (double s : {0.1, 0.4, 1.0, 2.5}) {
    for (double t : {0.2, 0.4, 0.9, 3.0}) {
      EXPECT_NEAR(fbm_kernel(0.7)(s, t), oracle::fbm_cov(s, t, 0.7), 1e-14);
      EXPECT_NEAR(bifbm_kernel(0.6, 0.5)(s, t), oracle::bifbm_cov(s, t, 0.6, 0.5), 1e-14);
      EXPECT_NEAR(subfbm_kernel(0.4)(s, t), oracle::subfbm_cov(s, t, 0.4), 1e-14);
    }
  }
}

TEST(Kernels, BrownianIsMinimum) {
  const auto k = fbm_kernel(0.5);
  EXPECT_DOUBLE_EQ(k(0.3, 0.8), 0.3);
  EXPECT_DOUBLE_EQ(k(1.0, 1.0), 1.0);
}

TEST(Kernels, RejectOutOfRangeParameters) {
  EXPECT_THROW(fbm_kernel(0.0), InvalidParameter);
  EXPECT_THROW(fbm_kernel(1.2), InvalidParameter);
  EXPECT_THROW(bifbm_kernel(1.0, 0.5), InvalidParameter);
  EXPECT_THROW(bifbm_kernel(0.5, 0.0), InvalidParameter);
  EXPECT_THROW(subfbm_kernel(1.0), InvalidParameter);
  EXPECT_THROW(make_kernel("kernal", 0.5), InvalidParameter);
}

TEST(Kernels, SelfSimilarity) {
  for (const auto& c : expansion_cases()) EXPECT_LT(self_similarity_defect(c.kernel), 1e-12) << c.kernel.describe();
}

TEST(Kernels, PositiveSemidefiniteOnGrid) {
  const auto times = probe_times();
  for (const auto& c : expansion_cases()) {
    EXPECT_NO_THROW({
      const double jitter = psd_jitter(c.kernel, times);
      EXPECT_LE(jitter, 1e-10);
    }) << c.kernel.describe();
  }
}

TEST(Kernels, StandardizedHasUnitVariance) {
  const auto k = standardized(subfbm_kernel(0.7));
  EXPECT_NEAR(k(1.0, 1.0), 1.0, 1e-15);
  EXPECT_TRUE(is_standardized(k));
  EXPECT_FALSE(is_standardized(subfbm_kernel(0.7)));
}

TEST(Kernels, LampertiStationarity) {
  for (const auto& c : expansion_cases()) {
    EXPECT_LT(lamperti_stationarity_defect(c.kernel), 1e-12) << c.kernel.describe();
    const auto r = lamperti_kernel(c.kernel);
    EXPECT_NEAR(r(0.0), 1.0, 1e-12);
    EXPECT_NEAR(r(0.7), r(-0.7), 1e-15);
  }
}

TEST(Kernels, LampertiRejectsNonSelfSimilar) {
  const CovarianceKernel bad("bad", {}, 0.5, [](double s, double t) { return std::exp(-std::abs(s - t)); });
  EXPECT_THROW(lamperti_kernel(bad), Inconsistency);
}

TEST(Kernels, BrownianLampertiIsOrnsteinUhlenbeck) {
  const auto r = lamperti_kernel(fbm_kernel(0.5));
  for (double tau : {0.0, 0.1, 1.0, 3.0}) EXPECT_NEAR(r(tau), std::exp(-0.5 * tau), 1e-14);
}

TEST(LocalExpansion, RecoversConstantsWithinOnePercent) {
  for (const auto& c : expansion_cases()) {
    const auto le = local_expansion(c.kernel);
    EXPECT_NEAR(le.D, c.D, 0.01 * c.D) << c.kernel.describe();
    EXPECT_NEAR(le.alpha, c.alpha, 0.01 * c.alpha) << c.kernel.describe();
    EXPECT_NEAR(le.kappa, c.kernel.kappa(), 1e-6) << c.kernel.describe();
  }
}

TEST(LocalExpansion, NeedsStandardizedKernel) {
  EXPECT_THROW(local_expansion(subfbm_kernel(0.7)), InvalidParameter);
}

TEST(LocalExpansion, DegenerateFbmOneHasNoExpansion) {
  EXPECT_THROW(local_expansion(fbm_kernel(1.0)), ExpansionNotApplicable);
}

TEST(SupBoundCov, BrownianBelowOneAwayFromZero) {
  const auto check = check_supboundcov(fbm_kernel(0.5), 0.01, 2.0);
  EXPECT_TRUE(check.holds);
  EXPECT_NEAR(check.max_value, std::exp(-0.5 * 0.01), 1e-12);
}

TEST(Linalg, RejectsDuplicateTimes) {
  const std::vector<double> t = {0.1, 0.5, 0.5, 1.0};
  EXPECT_THROW(linalg::reject_duplicates(t), NumericalDegeneracy);
}

TEST(Linalg, JitterScheduleStartsAtZero) {
  const std::vector<double> t = {0.2, 0.6, 1.0};
  const auto f = linalg::factor_with_jitter(linalg::gram_matrix(fbm_kernel(0.5), t), t);
  EXPECT_EQ(f.jitter, 0.0);
  const Eigen::MatrixXd back = f.lower * f.lower.transpose();
  EXPECT_NEAR(back(0, 2), 0.2, 1e-14);
}

TEST(Marginals, GaussianTailAndQuantile) {
  const auto g = gaussian_marginal();
  EXPECT_NEAR(g.tail(3.0), oracle::Phi_bar(3.0), 1e-18);
  EXPECT_NEAR(g.tail(g.upper_quantile(1e-10)), 1e-10, 1e-22);
  EXPECT_NEAR(g.quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_TRUE(g.gaussian());
}

TEST(Marginals, SkewReducesToGaussianAtZero) {
  const auto s = skew_marginal(0.0, 3);
  for (double u : {-1.0, 0.5, 4.0}) EXPECT_NEAR(s.tail(u), oracle::Phi_bar(u), 1e-16);
}

TEST(Marginals, SkewTailMatchesIndependentQuadrature) {
  const auto s = skew_marginal(0.5, 2);
  for (double u : {0.0, 1.0, 3.0, 5.0}) {
    const double ref = oracle::skew_tail(u, 0.5, 2);
    EXPECT_NEAR(s.tail(u), ref, 1e-7 * ref) << "u=" << u;
  }
  EXPECT_NEAR(s.tail(3.0) + s.cdf(3.0), 1.0, 1e-12);
}

TEST(Marginals, SkewTailMatchesSampling) {
  const double delta = 0.5;
  const int m = 2;
  const double u = 3.0;
  RngStream rng(11, 0, 0);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    double s2 = 0.0;
    for (int c = 0; c < m; ++c) {
      const double z = rng.normal();
      s2 += z * z;
    }
    hits += delta * std::sqrt(s2) + std::sqrt(1 - delta * delta) * rng.normal() > u ? 1 : 0;
  }
  const double p = skew_marginal(delta, m).tail(u);
  EXPECT_NEAR(hits / double(n), p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Marginals, SkewIsInGumbelDomain) {
  // G(u + x / w) / G(u) -> e^{-x}; at u = 8 the ratio is close.
  const auto s = skew_marginal(0.5, 2);
  const double u = 8.0;
  for (double x : {0.5, 1.0}) {
    EXPECT_NEAR(s.tail(u + x / rate_w(u)) / s.tail(u), std::exp(-x), 0.01 * std::exp(-x) + 0.05);
  }
}

TEST(Marginals, SkewQuantileInvertsTail) {
  const auto s = skew_marginal(0.5, 2);
  for (double p : {0.3, 1e-3, 1e-9}) EXPECT_NEAR(s.tail(s.upper_quantile(p)) / p, 1.0, 1e-8);
}

TEST(Scaling, ExponentsAndLimits) {
  const auto bm = scaling_scheme_for(1.0, 0.5);
  EXPECT_DOUBLE_EQ(bm.q(4.0), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(bm.w(4.0), 4.0);
  EXPECT_DOUBLE_EQ(bm.w(0.3), 1.0);
  EXPECT_DOUBLE_EQ(bm.beta3, 1.0);
  EXPECT_DOUBLE_EQ(bm.beta4, 1.0);
  EXPECT_TRUE(bm.thm4_applicable());

  const auto rough = scaling_scheme_for(0.5, 0.25);
  EXPECT_DOUBLE_EQ(rough.q(2.0), std::pow(2.0, -4.0));
  EXPECT_DOUBLE_EQ(rough.beta4, 0.0);

  const auto smooth = scaling_scheme_for(1.5, 0.75);
  EXPECT_DOUBLE_EQ(smooth.q(4.0), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(smooth.beta4, 1.0);
  EXPECT_DOUBLE_EQ(smooth.a_tilde(), 0.5);
}

TEST(Scaling, FittedExponentNearOneIsTreatedAsOne) {
  const auto s = scaling_scheme_for(1.0 + 2e-8, 0.5);
  EXPECT_DOUBLE_EQ(s.alpha, 1.0);
  EXPECT_DOUBLE_EQ(s.beta4, 1.0);
  EXPECT_FALSE(drift_only_regime(1.0 + 2e-8));
  EXPECT_TRUE(drift_only_regime(1.01));
}

TEST(Scaling, RejectsBadInputs) {
  EXPECT_THROW(scaling_scheme_for(0.0, 0.5), InvalidParameter);
  EXPECT_THROW(scaling_scheme_for(2.5, 0.5), InvalidParameter);
  EXPECT_THROW(scaling_scheme_for(1.0, 0.0), InvalidParameter);
}
