#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace ssx {

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  static MCEstimate make(double mean, double std_error, std::size_t n) {
    return {mean, std_error, n, mean - 1.96 * std_error, mean + 1.96 * std_error};
  }
};

/// Running sums; merged in a fixed order so results do not depend on
/// scheduling.
struct Moments {
  std::size_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++n;
    sum += x;
    sum_sq += x * x;
  }
  void merge(const Moments& o) {
    n += o.n;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
  }
  double std_error() const { return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
  MCEstimate estimate() const { return MCEstimate::make(mean(), std_error(), n); }
};

/// Sums for a ratio of means mean(a) / mean(b) with a delta-method error.
struct RatioMoments {
  std::size_t n = 0;
  double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;

  void add(double a, double b) {
    ++n;
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }
  void merge(const RatioMoments& o) {
    n += o.n;
    sa += o.sa;
    sb += o.sb;
    saa += o.saa;
    sbb += o.sbb;
    sab += o.sab;
  }
  double ratio() const { return sa / sb; }
  double std_error() const {
    if (n < 2 || sb == 0.0) return 0.0;
    const double nn = static_cast<double>(n);
    const double ma = sa / nn, mb = sb / nn, r = ma / mb;
    const double va = saa / nn - ma * ma;
    const double vb = sbb / nn - mb * mb;
    const double cab = sab / nn - ma * mb;
    const double v = (va - 2.0 * r * cab + r * r * vb) / (mb * mb);
    return std::sqrt(std::max(0.0, v) / (nn - 1.0));
  }
};

/// Delta-method error of a / b for independent a, b.
inline double ratio_std_error(double a, double sa, double b, double sb) {
  const double r = a / b;
  return std::abs(r) * std::sqrt((a != 0.0 ? (sa / a) * (sa / a) : 0.0) +
                                 (b != 0.0 ? (sb / b) * (sb / b) : 0.0));
}

}  // namespace ssx
