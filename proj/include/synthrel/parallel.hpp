#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "synthrel/error.hpp"

namespace synthrel {

/// Set from a signal handler; workers stop picking up new items.
inline std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Items are claimed
/// in index order; results must be written by index so the outcome does not
/// depend on scheduling. The first exception stops further claims and is
/// rethrown after all threads join. An interrupt raises Interrupted.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (n == 0) return;
  workers = std::clamp<std::size_t>(workers, 1, n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mu;

  auto body = [&] {
    while (!stop.load()) {
      if (interrupt_flag().load()) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::make_exception_ptr(Interrupted{});
        stop = true;
        return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };

  if (workers == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace synthrel
