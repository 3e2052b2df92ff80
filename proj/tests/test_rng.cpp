#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "ssx/numeric.hpp"
#include "ssx/parallel.hpp"
#include "ssx/rng.hpp"
#include "ssx/stats.hpp"

using ssx::Philox4x32;
using ssx::RngStream;

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                     {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                     {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(RngStream, SameCoordinatesSameSequence) {
  RngStream a(42, 3, 1), b(42, 3, 1);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a(), b());
}

TEST(RngStream, DistinctCoordinatesDiffer) {
  std::set<std::uint64_t> first;
  for (std::uint32_t batch = 0; batch < 4; ++batch) {
    for (std::uint32_t sub = 0; sub < 4; ++sub) first.insert(RngStream(7, batch, sub)());
  }
  first.insert(RngStream(8, 0, 0)());
  EXPECT_EQ(first.size(), 17u);
}

TEST(RngStream, UniformInOpenInterval) {
  RngStream rng(1, 0, 0);
  ssx::Moments m;
  for (int i = 0; i < 200000; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    m.add(u);
  }
  EXPECT_NEAR(m.mean(), 0.5, 4.0 * std::sqrt(1.0 / 12.0 / 200000));
}

TEST(RngStream, NormalMoments) {
  RngStream rng(2, 0, 0);
  const int n = 400000;
  ssx::Moments m, m4;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m.add(z);
    m4.add(z * z * z * z);
  }
  EXPECT_NEAR(m.mean(), 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m.variance(), 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4.mean(), 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(RngStream, NormalTailFrequency) {
  RngStream rng(3, 0, 0);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += rng.normal() > 2.0 ? 1 : 0;
  const double p = ssx::numeric::normal_tail(2.0);
  EXPECT_NEAR(hits / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(RngStream, NormalAboveStaysAbove) {
  RngStream rng(4, 0, 0);
  for (double a : {-1.0, 0.0, 3.0, 8.0, 20.0}) {
    ssx::Moments m;
    for (int i = 0; i < 20000; ++i) {
      const double z = rng.normal_above(a);
      ASSERT_GE(z, a);
      m.add(z);
    }
    // Mean of the truncated normal: phi(a) / Phi_bar(a), about a + 1/a far out.
    const double mean = a < 10 ? ssx::numeric::normal_pdf(a) / ssx::numeric::normal_tail(a) : a + 1.0 / a;
    EXPECT_NEAR(m.mean(), mean, 5.0 * m.std_error() + 1e-3 * std::abs(mean));
  }
}

TEST(RngStream, NormalBelowStaysBelow) {
  RngStream rng(5, 0, 0);
  for (int i = 0; i < 10000; ++i) ASSERT_LE(rng.normal_below(-2.5), -2.5);
}

TEST(RngStream, ExponentialMean) {
  RngStream rng(6, 0, 0);
  ssx::Moments m;
  for (int i = 0; i < 200000; ++i) m.add(rng.exponential());
  EXPECT_NEAR(m.mean(), 1.0, 4.0 * m.std_error());
}

TEST(RunBatches, ResultsInBatchOrderForAnyWorkerCount) {
  auto fn = [](std::size_t b) {
    RngStream rng(9, static_cast<std::uint32_t>(b), 0);
    double s = 0.0;
    for (int i = 0; i < 1000; ++i) s += rng.normal();
    return s;
  };
  const auto one = ssx::run_batches<double>(37, 1, fn);
  for (unsigned w : {2u, 4u, 16u}) EXPECT_EQ(ssx::run_batches<double>(37, w, fn), one);
}

TEST(RunBatches, RethrowsLowestBatchError) {
  auto fn = [](std::size_t b) -> int {
    if (b == 5 || b == 9) throw ssx::NumericalError("batch " + std::to_string(b));
    return 0;
  };
  try {
    ssx::run_batches<int>(12, 4, fn);
    FAIL() << "expected an exception";
  } catch (const ssx::NumericalError& e) {
    EXPECT_STREQ(e.what(), "batch 5");
  }
}

TEST(ResolveWorkers, ExplicitRequestWins) { EXPECT_EQ(ssx::resolve_workers(3), 3u); }
