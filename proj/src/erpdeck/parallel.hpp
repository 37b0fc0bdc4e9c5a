#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace erpdeck {

// Fork-join helper over an index range. Determinism contract: the function
// for index i writes only state owned by i (reductions inside one index run
// sequentially), so results do not depend on thread count or scheduling.
//
// Nested calls from inside a worker run serially, which keeps cell-level
// parallelism (comparison grids) and layer-level parallelism composable.
class ThreadPool {
 public:
  explicit ThreadPool(int threads);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int threads() const { return threads_; }

  // Runs fn(begin, end) over contiguous chunks covering [0, n).
  void for_range(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

  // Runs fn(i) for i in [0, n), chunked.
  void for_each(int64_t n, const std::function<void(int64_t)>& fn);

  // Process-wide pool. Size fixed on first use; set_global_threads must be
  // called before any work is submitted (the CLI does this from --jobs).
  static ThreadPool& global();
  static void set_global_threads(int threads);

 private:
  struct Impl;
  Impl* impl_;
  int threads_;
};

}  // namespace erpdeck
