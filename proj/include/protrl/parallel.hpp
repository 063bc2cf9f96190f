#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace protrl {

/// Runs fn(i) for i in [0, n) on at most `max_workers` threads. Returns
/// one exception_ptr per index (null on success); results must be written
/// by fn into index-addressed storage so aggregation is order-independent.
template <typename Fn>
std::vector<std::exception_ptr> parallel_for(std::size_t n, std::size_t max_workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto workers = std::min(n, std::max<std::size_t>(1, max_workers));
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
    return errors;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run(i);
    });
  }
  for (auto& t : pool) t.join();
  return errors;
}

}  // namespace protrl
