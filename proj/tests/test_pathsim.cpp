#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "ssx/palm.hpp"
#include "ssx/pathsim.hpp"
#include "ssx/stats.hpp"

using namespace ssx;

namespace {

// Empirical covariance of columns a and b.
double sample_cov(const RowMatrix& v, Eigen::Index a, Eigen::Index b) {
  const double ma = v.col(a).mean(), mb = v.col(b).mean();
  return ((v.col(a).array() - ma) * (v.col(b).array() - mb)).sum() / double(v.rows() - 1);
}

void expect_covariance(const PathEnsemble& ens, const CovarianceKernel& k, double tol) {
  const auto n = static_cast<Eigen::Index>(ens.cols());
  for (Eigen::Index a : {Eigen::Index(0), n / 3, n - 1}) {
    for (Eigen::Index b : {n / 2, n - 1}) {
      const double ref = k(ens.grid[a], ens.grid[b]);
      EXPECT_NEAR(sample_cov(ens.values, a, b), ref, tol) << "t=" << ens.grid[a] << "," << ens.grid[b];
    }
  }
}

}  // namespace

TEST(Cholesky, EmpiricalCovarianceMatchesKernel) {
  const auto k = standardized(subfbm_kernel(0.3));
  const auto grid = make_grid(GridLayout::uniform, 32);
  RngStream rng(1, 0, 0);
  const auto ens = sample_paths(plan_cholesky(k, grid), 40000, rng);
  expect_covariance(ens, k, 0.025);
}

TEST(Circulant, EmpiricalCovarianceMatchesKernel) {
  const auto k = fbm_kernel(0.7);
  const auto grid = make_grid(GridLayout::log_uniform, 200, 1e-2);
  const PathSampler sampler(k, grid);
  ASSERT_EQ(sampler.method(), PathSampler::Method::circulant);
  EXPECT_FALSE(sampler.fallback_used());
  RngStream rng(2, 0, 0);
  const auto ens = sample_paths(sampler, 40000, rng);
  expect_covariance(ens, k, 0.025);
}

TEST(Circulant, AgreesWithCholeskyInDistribution) {
  const auto k = standardized(bifbm_kernel(0.6, 0.7));
  const auto grid = make_grid(GridLayout::log_uniform, 64, 1e-2);
  RngStream r1(3, 0, 0), r2(3, 1, 0);
  const auto a = sample_paths(PathSampler(k, grid, PathSampler::Method::circulant), 40000, r1);
  const auto b = sample_paths(PathSampler(k, grid, PathSampler::Method::cholesky), 40000, r2);
  for (Eigen::Index j : {Eigen::Index(10), Eigen::Index(40), Eigen::Index(63)}) {
    EXPECT_NEAR(sample_cov(a.values, j, 63), sample_cov(b.values, j, 63), 0.035);
  }
}

TEST(Circulant, OrnsteinUhlenbeckEmbeddingIsNonNegative) {
  const auto plan = plan_circulant(lamperti_kernel(fbm_kernel(0.5)), 500, 0.01);
  EXPECT_FALSE(plan.fallback);
  EXPECT_GE(plan.min_eigenvalue, kEmbeddingTolerance);
  EXPECT_GE(plan.m, 2 * (500 - 1));
}

TEST(Circulant, LampertiRoundTripRestoresUnitInterval) {
  const auto grid = make_grid(GridLayout::log_uniform, 16, 1e-2);
  RngStream rng(4, 0, 0);
  auto stat = circulant_sample(lamperti_kernel(fbm_kernel(0.5)), grid, 3, rng);
  EXPECT_TRUE(stat.log_time);
  EXPECT_DOUBLE_EQ(stat.grid.times.back(), 0.0);
  const auto unit = lamperti_to_unit_interval(stat, 0.5);
  EXPECT_FALSE(unit.log_time);
  for (std::size_t j = 0; j < grid.size(); ++j) EXPECT_NEAR(unit.grid[j], grid[j], 1e-14);
  EXPECT_NEAR(unit.values(1, 0), stat.values(1, 0) * std::sqrt(grid[0]), 1e-14);
}

TEST(PathSampler, RejectsDuplicateTimes) {
  GridSpec g;
  g.times = {0.25, 0.5, 0.5, 1.0};
  EXPECT_THROW(PathSampler(fbm_kernel(0.5), g, PathSampler::Method::cholesky), NumericalDegeneracy);
}

TEST(PathSampler, RegressionMatchesKernel) {
  const auto k = fbm_kernel(0.5);
  const auto grid = make_grid(GridLayout::log_uniform, 50, 1e-2);
  const PathSampler circ(k, grid, PathSampler::Method::circulant);
  const PathSampler chol(k, grid, PathSampler::Method::cholesky);
  std::vector<double> a(grid.size()), b(grid.size());
  circ.regression(grid.size() - 1, a);
  chol.regression(grid.size() - 1, b);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    EXPECT_NEAR(a[j], grid[j], 1e-12);
    EXPECT_NEAR(b[j], grid[j], 1e-12);
  }
}

TEST(PathSampler, SameStreamSameEnsemble) {
  const PathSampler s(fbm_kernel(0.4), make_grid(GridLayout::log_uniform, 33, 1e-3));
  RngStream a(5, 2, 1), b(5, 2, 1);
  EXPECT_EQ(sample_paths(s, 7, a).values, sample_paths(s, 7, b).values);
}

TEST(EnsembleSource, OddRowCountsReuseTheSecondHalf) {
  const auto k = fbm_kernel(0.5);
  const auto grid = make_grid(GridLayout::log_uniform, 40, 1e-2);
  detail::EnsembleSource src(3, 0.0, 1, k, grid);
  RngStream r1(6, 0, 0), r2(6, 0, 0);
  RowMatrix first, second;
  CirculantWorkspace ws;
  src.draw(r1, first, ws);
  src.draw(r1, second, ws);
  RowMatrix both(6, static_cast<Eigen::Index>(grid.size()));
  src.sampler().sample(r2, both, ws);
  EXPECT_EQ(first, both.topRows(3));
  EXPECT_EQ(second, both.bottomRows(3));
}

TEST(Skew, CombinesComponents) {
  const auto grid = make_grid(GridLayout::uniform, 4);
  std::vector<PathEnsemble> parts(3);
  for (int c = 0; c < 3; ++c) {
    parts[c].grid = grid;
    parts[c].values = RowMatrix::Constant(2, 4, c + 1.0);
  }
  const auto z = sample_skew(parts, 0.6);
  EXPECT_NEAR(z.values(1, 2), 0.6 * std::sqrt(1.0 + 4.0) + 0.8 * 3.0, 1e-14);
  parts[1].values = RowMatrix::Zero(3, 4);
  EXPECT_THROW(sample_skew(parts, 0.6), ShapeError);
  EXPECT_THROW(sample_skew(std::span(parts).first(1), 0.6), InvalidParameter);
}

TEST(Skew, MarginalTailMatchesOracle) {
  const auto k = fbm_kernel(0.5);
  const auto grid = make_grid(GridLayout::uniform, 2);
  std::vector<PathEnsemble> parts;
  for (std::uint32_t c = 0; c < 3; ++c) {
    RngStream rng(7, c, 0);
    parts.push_back(sample_paths(plan_cholesky(k, grid), 400000, rng));
  }
  const auto z = sample_skew(parts, 0.5);
  const double p = oracle::skew_tail(2.0, 0.5, 2);
  const double hits = (z.values.col(1).array() > 2.0).cast<double>().mean();
  EXPECT_NEAR(hits, p, 4.0 * std::sqrt(p * (1 - p) / 400000));
}

TEST(OrderStatistic, PicksRthLargest) {
  RowMatrix v(4, 3);
  v << 1, 9, -1,
       4, 2, -2,
       3, 7, -3,
       2, 8, -4;
  std::vector<double> out;
  order_statistic(v, 1, out);
  EXPECT_EQ(out, (std::vector<double>{4, 9, -1}));
  order_statistic(v, 2, out);
  EXPECT_EQ(out, (std::vector<double>{3, 8, -2}));
  order_statistic(v, 4, out);
  EXPECT_EQ(out, (std::vector<double>{1, 2, -4}));
  EXPECT_THROW(order_statistic(v, 0, out), InvalidParameter);
  EXPECT_THROW(order_statistic(v, 5, out), InvalidParameter);
}

TEST(ConditionalTail, EndpointAboveLevelAndCorrectMean) {
  // Brownian motion given B(1) = v is a bridge with mean t v.
  const auto grid = make_grid(GridLayout::uniform, 10);
  RngStream rng(8, 0, 0);
  const double u = 2.0;
  const auto ens = conditional_tail_ensemble(fbm_kernel(0.5), grid, u, 50000, rng);
  for (std::size_t i = 0; i < ens.rows(); ++i) ASSERT_GT(ens.values(i, 9), u);
  const double mean_end = oracle::phi(u) / oracle::Phi_bar(u);
  EXPECT_NEAR(ens.values.col(9).mean(), mean_end, 0.01);
  EXPECT_NEAR(ens.values.col(4).mean(), 0.5 * mean_end, 0.02);
  // Var(B(t) | B(1)) = t (1 - t) plus t^2 Var(B(1) | B(1) > u).
  const double var_end = 1.0 + u * mean_end - mean_end * mean_end;
  EXPECT_NEAR(sample_cov(ens.values, 4, 4), 0.25 + 0.25 * var_end, 0.02);
}

TEST(ConditionalTail, NeedsEndpointOnGrid) {
  RngStream rng(9, 0, 0);
  EXPECT_THROW(conditional_tail_ensemble(fbm_kernel(0.5), custom_grid({0.2, 0.5}), 1.0, 2, rng),
               InvalidParameter);
  EXPECT_THROW(conditional_tail_ensemble(fbm_kernel(0.5), make_grid(GridLayout::uniform, 4), -9.0, 2, rng),
               UnsupportedOperation);
}

TEST(Palm, TruncatedBinomialRespectsFloor) {
  RngStream rng(10, 0, 0);
  Moments m;
  for (int i = 0; i < 100000; ++i) {
    const auto k = detail::truncated_binomial(rng, 3, 2, 0.1);
    ASSERT_GE(k, 2u);
    ASSERT_LE(k, 3u);
    m.add(static_cast<double>(k));
  }
  // P(K = 3 | K >= 2) = 0.001 / (3 * 0.009 + 0.001).
  const double p3 = 0.001 / 0.028;
  EXPECT_NEAR(m.mean(), 2.0 + p3, 4.0 * std::sqrt(p3 * (1 - p3) / 100000));
}

TEST(EnsembleCsv, HeaderAndRows) {
  PathEnsemble ens;
  ens.grid = custom_grid({0.5, 1.0});
  ens.values = RowMatrix::Constant(2, 2, 0.25);
  std::ostringstream os;
  write_ensemble_csv(ens, os);
  EXPECT_EQ(os.str(), "t,0.5,1\n0,0.25,0.25\n1,0.25,0.25\n");
}
