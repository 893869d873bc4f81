// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bwc {

/// Runs fn(i) for i in [0, n) on up to `degree` threads. Work is claimed
/// dynamically; callers write results into pre-sized slots so the reduction
/// order stays deterministic. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t degree, Fn&& fn) {
  degree = std::clamp<std::size_t>(degree, 1, std::max<std::size_t>(n, 1));
  if (degree == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(degree);
    for (std::size_t w = 0; w < degree; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace bwc
