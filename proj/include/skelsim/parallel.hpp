#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace skelsim {

// SKELSIM_JOBS, else the hardware concurrency
inline int default_jobs() {
  if (const char* e = std::getenv("SKELSIM_JOBS")) {
    int j = std::atoi(e);
    if (j > 0) return j;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// results[i] = f(i); the output order never depends on scheduling
template <class F>
auto parallel_map(std::size_t n, int jobs, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(n);
  if (jobs <= 0) jobs = default_jobs();
  jobs = static_cast<int>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace skelsim
