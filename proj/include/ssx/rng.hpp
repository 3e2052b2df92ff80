#pragma once

// Counter-based random streams.
//
// Philox4x32-10 (Salmon et al., SC'11) maps a 128-bit counter and a 64-bit
// key to 128 random bits.  A stream is identified by (master seed, batch,
// sub-stream); the seed is the key, batch and sub-stream occupy the upper
// half of the counter and the lower half counts blocks.  Any draw is a pure
// function of its coordinates, so results do not depend on scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/normal_distribution.hpp>

namespace ssx {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) noexcept {
    std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
    std::uint32_t k0 = key[0], k1 = key[1];
#pragma GCC unroll 10
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kM0} * c0;
      const std::uint64_t p1 = std::uint64_t{kM1} * c2;
      const auto n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
      const auto n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
      c1 = static_cast<std::uint32_t>(p1);
      c3 = static_cast<std::uint32_t>(p0);
      c0 = n0;
      c2 = n2;
      k0 += kW0;
      k1 += kW1;
    }
    return {c0, c1, c2, c3};
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Coordinates of a stream; also recorded as seed provenance on ensembles.
struct StreamId {
  std::uint64_t seed = 0;
  std::uint32_t batch = 0;
  std::uint32_t sub = 0;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Sequential view of one counter-based stream.  Satisfies the
/// UniformRandomBitGenerator requirements (64-bit output).
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() = default;
  explicit RngStream(StreamId id) : id_(id) {}
  RngStream(std::uint64_t seed, std::uint32_t batch, std::uint32_t sub = 0)
      : id_{seed, batch, sub} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  const StreamId& id() const noexcept { return id_; }

  result_type operator()() noexcept {
    if (lane_ == buffer_.size()) refill();
    return buffer_[lane_++];
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal (ziggurat).
  double normal() {
    boost::random::normal_distribution<double> unit;
    return unit(*this);
  }

  /// Unit-mean exponential.
  double exponential() noexcept { return -std::log(uniform()); }

  /// Standard normal conditioned on exceeding `a` (inverse transform in the
  /// upper tail, accurate far into it).
  double normal_above(double a) {
    static const boost::math::normal_distribution<double> unit{};
    const double tail = boost::math::cdf(boost::math::complement(unit, a));
    if (tail <= 0.0) return a;
    return boost::math::quantile(boost::math::complement(unit, uniform() * tail));
  }

  /// Standard normal conditioned on staying at or below `b`.
  double normal_below(double b) { return -normal_above(-b); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  // Several consecutive blocks per refill; the output order is the same as
  // one block at a time.
  void refill() noexcept {
    const Philox4x32::Key key = {static_cast<std::uint32_t>(id_.seed),
                                 static_cast<std::uint32_t>(id_.seed >> 32)};
    for (std::size_t b = 0; b < kBlocks; ++b, ++block_) {
      const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(block_),
                                       static_cast<std::uint32_t>(block_ >> 32), id_.sub, id_.batch};
      const auto out = Philox4x32::apply(ctr, key);
      buffer_[2 * b] = (std::uint64_t{out[1]} << 32) | out[0];
      buffer_[2 * b + 1] = (std::uint64_t{out[3]} << 32) | out[2];
    }
    lane_ = 0;
  }

  static constexpr std::size_t kBlocks = 4;

  StreamId id_{};
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2 * kBlocks> buffer_{};
  std::size_t lane_ = 2 * kBlocks;
};

}  // namespace ssx
