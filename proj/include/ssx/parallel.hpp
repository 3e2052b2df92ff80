#pragma once

// Deterministic batch parallelism: batch b is a pure function of b (its
// random stream is derived from the master seed and b), results are stored
// by index and reduced in index order by the caller.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ssx/error.hpp"

namespace ssx {

inline constexpr const char* kWorkersEnv = "SSX_WORKERS";

/// Worker count: explicit request, else the SSX_WORKERS environment
/// variable, else the hardware concurrency.
inline unsigned resolve_workers(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv(kWorkersEnv)) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    throw ConfigError(std::string(kWorkersEnv) + " must be a positive integer, got '" + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(b) for b in [0, batches) on `workers` threads and returns the
/// results in batch order.  The first exception (lowest batch index) is
/// rethrown after all threads have joined.
template <class Result, class Fn>
std::vector<Result> run_batches(std::size_t batches, unsigned workers, Fn&& fn) {
  std::vector<Result> results(batches);
  std::vector<std::exception_ptr> errors(batches);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t b = next++; b < batches; b = next++) {
      try {
        results[b] = fn(b);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), batches));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace ssx
