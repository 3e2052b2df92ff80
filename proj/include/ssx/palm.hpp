#pragma once

// Occupation-weighted (Palm) sampling of n-copy Gaussian ensembles.
//
// With grid weights c_j and W = sum_j c_j 1{X_{r:n}(t_j) > u}, a grid index J
// is chosen with probability c_J P(X_{r:n}(t_J) > u) / E[W] and the copies
// are conditioned exactly on {X_{r:n}(t_J) > u}: the number K >= r of
// copies above u at t_J is a truncated binomial, the first K copies are
// conditioned above u and the rest below.  The result has law W dP / E[W],
// so for example P(W > 0) = E[W] E_palm[1 / W].

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ssx/asymptotics.hpp"
#include "ssx/error.hpp"
#include "ssx/grid.hpp"
#include "ssx/kernels.hpp"
#include "ssx/numeric.hpp"
#include "ssx/pathsim.hpp"
#include "ssx/rng.hpp"

namespace ssx::detail {

// Simulates one ensemble of n copies into `block` (n x N); skew-Gaussian
// copies are assembled from m + 1 Gaussian components each.
class EnsembleSource {
 public:
  EnsembleSource(std::size_t n, double delta, int m, const CovarianceKernel& kernel,
                 const GridSpec& grid)
      : n_(n), delta_(delta), m_(m), sampler_(kernel, grid) {}

  const PathSampler& sampler() const { return sampler_; }

  void draw(RngStream& rng, RowMatrix& block, CirculantWorkspace& ws) {
    const auto n = static_cast<Eigen::Index>(n_);
    const auto N = static_cast<Eigen::Index>(sampler_.size());
    if (delta_ == 0.0) {
      block.resize(n, N);
      raw_rows(rng, block, ws);
      return;
    }
    const auto parts = static_cast<Eigen::Index>(m_ + 1);
    components_.resize(n * parts, N);
    raw_rows(rng, components_, ws);
    const double rest = std::sqrt(1.0 - delta_ * delta_);
    block.resize(n, N);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < N; ++j) {
        double s2 = 0.0;
        for (Eigen::Index c = 0; c + 1 < parts; ++c) {
          const double v = components_(i * parts + c, j);
          s2 += v * v;
        }
        block(i, j) = delta_ * std::sqrt(s2) + rest * components_(i * parts + parts - 1, j);
      }
    }
  }

 private:
  // One FFT yields two rows, so an odd row count on the circulant path
  // samples twice as many rows and keeps the second half for the next call.
  void raw_rows(RngStream& rng, RowMatrix& rows, CirculantWorkspace& ws) {
    const Eigen::Index R = rows.rows();
    if (sampler_.method() != PathSampler::Method::circulant || R % 2 == 0) {
      sampler_.sample(rng, rows, ws);
      return;
    }
    if (has_spare_) {
      rows = spare_.bottomRows(R);
      has_spare_ = false;
      return;
    }
    spare_.resize(2 * R, rows.cols());
    sampler_.sample(rng, spare_, ws);
    rows = spare_.topRows(R);
    has_spare_ = true;
  }

  std::size_t n_;
  double delta_;
  int m_;
  PathSampler sampler_;
  RowMatrix components_;
  RowMatrix spare_;
  bool has_spare_ = false;
};

// Exact ingredients of the occupation-weighted law at one level.
struct PalmLevel {
  std::vector<double> weight;     // c_j
  std::vector<double> g;          // P(X(t_j) > u)
  std::vector<double> cumulative; // normalized cumulative of c_j P(X_{r:n}(t_j) > u)
  double mean_w = 0.0;            // E[W]
};

inline PalmLevel palm_level(const PathSampler& sampler, double u, std::size_t n, std::size_t r,
                            std::vector<double> weight) {
  PalmLevel lvl;
  const std::size_t N = sampler.size();
  lvl.weight = std::move(weight);
  lvl.g.resize(N);
  lvl.cumulative.resize(N);
  double acc = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    lvl.g[j] = numeric::normal_tail(u / std::sqrt(sampler.variance(j)));
    acc += lvl.weight[j] * order_tail_from(lvl.g[j], n, r);
    lvl.cumulative[j] = acc;
  }
  if (!(acc > 0.0)) throw NumericalError("palm estimator: level has zero occupation mass");
  for (auto& c : lvl.cumulative) c /= acc;
  lvl.mean_w = acc;
  return lvl;
}

// Draws K from Binomial(n, g) conditioned on K >= r.
inline std::size_t truncated_binomial(RngStream& rng, std::size_t n, std::size_t r, double g) {
  if (r == n) return n;
  std::vector<double> p(n + 1, 0.0);
  double total = 0.0;
  const double lg = std::log(g), lq = std::log1p(-g);
  for (std::size_t k = r; k <= n; ++k) {
    p[k] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                    static_cast<double>(k) * lg + static_cast<double>(n - k) * lq);
    total += p[k];
  }
  double v = rng.uniform() * total;
  for (std::size_t k = r; k < n; ++k) {
    if (v < p[k]) return k;
    v -= p[k];
  }
  return n;
}

// One ensemble from the occupation-weighted law; returns J.
inline std::size_t palm_draw(RngStream& rng, EnsembleSource& src, const PalmLevel& lvl, double u,
                             std::size_t n, std::size_t r, RowMatrix& block, std::vector<double>& k,
                             CirculantWorkspace& ws) {
  const double v = rng.uniform();
  const auto it = std::lower_bound(lvl.cumulative.begin(), lvl.cumulative.end(), v);
  std::size_t J = static_cast<std::size_t>(it - lvl.cumulative.begin());
  J = std::min(J, lvl.cumulative.size() - 1);
  while (lvl.weight[J] == 0.0 && J + 1 < lvl.cumulative.size()) ++J;
  const std::size_t K = truncated_binomial(rng, n, r, lvl.g[J]);
  src.draw(rng, block, ws);
  const PathSampler& s = src.sampler();
  const std::size_t N = s.size();
  k.resize(N);
  s.regression(J, k);
  const double sd = std::sqrt(s.variance(J));
  for (std::size_t i = 0; i < n; ++i) {
    const double value = i < K ? sd * rng.normal_above(u / sd) : sd * rng.normal_below(u / sd);
    PathSampler::condition_row({block.data() + i * N, N}, k, J, value);
  }
  return J;
}

}  // namespace ssx::detail
