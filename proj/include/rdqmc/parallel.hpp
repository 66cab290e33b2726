#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rdqmc {

// Runs body(task) for task in [0, count) on up to `threads` workers.
// Tasks are claimed dynamically; callers write results into per-task slots
// and reduce them afterwards in task order, so output never depends on the
// worker count. The exception of the lowest failing task is rethrown.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  if (count == 0) return;
  unsigned workers = std::max(1u, threads);
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));

  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::size_t err_task = count;
  std::exception_ptr err;

  auto run = [&] {
    for (;;) {
      std::size_t t = next.fetch_add(1);
      if (t >= count) return;
      try {
        body(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (t < err_task) {
          err_task = t;
          err = std::current_exception();
        }
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace rdqmc
