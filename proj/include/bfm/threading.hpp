#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bfm {

inline int default_thread_count() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Splits [0, count) into one contiguous chunk per worker and runs
// fn(worker, begin, end). worker 0 runs on the calling thread, so
// threads == 1 is a plain loop with no spawn cost.
inline void parallel_chunks(int threads, std::size_t count,
                            const std::function<void(int, std::size_t, std::size_t)>& fn) {
  if (count == 0) return;
  if (threads < 1) threads = 1;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  if (workers == 1) {
    fn(0, 0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](int w) {
    const std::size_t lo = count * w / workers;
    const std::size_t hi = count * (w + 1) / workers;
    try {
      fn(w, lo, hi);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  for (std::size_t w = 1; w < workers; ++w)
    pool.emplace_back(run, static_cast<int>(w));
  run(0);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bfm
