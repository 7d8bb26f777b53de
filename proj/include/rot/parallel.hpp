#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rot/error.hpp"

namespace rot {

/// ROT_THREADS if set, else the hardware concurrency (at least 1).
inline unsigned default_threads() {
  if (const char* env = std::getenv("ROT_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value >= 1) return unsigned(value);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("ROT_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(k) for k in [0, count) on up to `threads` workers. Tasks must only
/// write to their own slot. If tasks throw, the exception of the smallest
/// failing index is rethrown after all workers finish.
template <typename Fn>
void parallel_for(Index count, unsigned threads, Fn&& fn) {
  if (count <= 0) return;
  threads = std::max(1u, std::min<unsigned>(threads, unsigned(std::min<Index>(count, 1 << 20))));
  std::atomic<Index> next{0};
  std::mutex failure_mutex;
  Index failed_at = count;
  std::exception_ptr failure;
  auto worker = [&] {
    for (Index k = next++; k < count; k = next++) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (k < failed_at) {
          failed_at = k;
          failure = std::current_exception();
        }
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rot
