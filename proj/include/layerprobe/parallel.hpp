#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace layerprobe {

// Runs job(i) for i in [0, count) on at most `workers` threads. Jobs write to
// index-addressed slots, so completion order never shows up in results. If
// any job throws, the exception of the lowest failing index is rethrown after
// all threads have joined.
template <typename Job>
void parallel_for(std::size_t count, std::size_t workers, Job&& job) {
  std::vector<std::exception_ptr> errors(count);
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto run = [&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace layerprobe
