#ifndef ENDOSIM_PARALLEL_HPP
#define ENDOSIM_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace endosim {

/// Worker cap: ENDOSIM_THREADS if set and positive, else the hardware count.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("ENDOSIM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n). Each index is written by exactly one worker,
/// so callers storing into a pre-sized vector stay deterministic. The first
/// exception is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = default_thread_count()) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace endosim

#endif  // ENDOSIM_PARALLEL_HPP
