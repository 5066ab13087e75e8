#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace ace {

/// Runs fn(i) for i in [0, total) on up to `threads` workers with static
/// chunking. Results must go to preassigned slots so the schedule cannot
/// change the outcome.
inline void parallel_for(std::size_t total, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || total <= 1) {
    for (std::size_t i = 0; i < total; ++i) fn(i);
    return;
  }
  unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(total));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < total; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace ace
