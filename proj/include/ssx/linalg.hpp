#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ssx/error.hpp"

namespace ssx::linalg {

/// Diagonal inflation schedule, relative to the largest diagonal entry.
inline constexpr double kJitterSchedule[] = {0.0, 1e-12, 1e-11, 1e-10};

template <class Cov>
Eigen::MatrixXd gram_matrix(const Cov& cov, std::span<const double> times) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = cov(times[static_cast<std::size_t>(i)], times[static_cast<std::size_t>(j)]);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

inline std::string describe_grid(std::span<const double> times) {
  std::ostringstream os;
  os.precision(6);
  os << "grid of " << times.size() << " points";
  if (!times.empty()) os << " in [" << times.front() << ", " << times.back() << "]";
  return os.str();
}

struct Factor {
  Eigen::MatrixXd lower;
  double jitter = 0.0;  // absolute diagonal inflation that was needed
};

/// Cholesky with bounded jitter escalation; throws NumericalDegeneracy
/// naming the grid when the schedule is exhausted.
inline Factor factor_with_jitter(const Eigen::MatrixXd& gram, std::span<const double> times) {
  const double scale = gram.size() == 0 ? 1.0 : std::max(gram.diagonal().maxCoeff(), 1e-300);
  for (double rel : kJitterSchedule) {
    Eigen::MatrixXd work = gram;
    work.diagonal().array() += rel * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
      return {llt.matrixL().toDenseMatrix(), rel * scale};
    }
  }
  throw NumericalDegeneracy("Cholesky factorization failed after maximum jitter on " +
                            describe_grid(times));
}

/// Throws NumericalDegeneracy when two time points coincide (singular Gram).
inline void reject_duplicates(std::span<const double> times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t j = i + 1; j < times.size(); ++j) {
      if (std::abs(times[i] - times[j]) <= 1e-15 * std::max(std::abs(times[i]), 1.0)) {
        std::ostringstream os;
        os << "duplicated time point " << times[i] << " makes the Gram matrix singular on "
           << describe_grid(times);
        throw NumericalDegeneracy(os.str());
      }
    }
  }
}

}  // namespace ssx::linalg
