#include "erpdeck/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace erpdeck {

namespace {
thread_local bool t_inside_worker = false;
}

struct ThreadPool::Impl {
  std::vector<std::thread> workers;
  std::mutex mu;
  std::condition_variable cv_work;
  std::condition_variable cv_done;

  // Current job; generation counter wakes workers exactly once per job.
  const std::function<void(int64_t, int64_t)>* fn = nullptr;
  int64_t n = 0;
  int64_t chunk = 1;
  std::atomic<int64_t> next{0};
  std::atomic<int> active{0};
  uint64_t generation = 0;
  bool stop = false;

  void worker_loop() {
    t_inside_worker = true;
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(mu);
        cv_work.wait(lk, [&] { return stop || generation != seen; });
        if (stop) return;
        seen = generation;
      }
      run_chunks();
      if (active.fetch_sub(1) == 1) {
        std::lock_guard<std::mutex> lk(mu);
        cv_done.notify_all();
      }
    }
  }

  void run_chunks() {
    for (;;) {
      int64_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      int64_t end = begin + chunk < n ? begin + chunk : n;
      (*fn)(begin, end);
    }
  }
};

ThreadPool::ThreadPool(int threads) : impl_(new Impl), threads_(threads < 1 ? 1 : threads) {
  for (int i = 0; i + 1 < threads_; ++i) {
    impl_->workers.emplace_back([this] { impl_->worker_loop(); });
  }
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->stop = true;
    impl_->cv_work.notify_all();
  }
  for (auto& w : impl_->workers) w.join();
  delete impl_;
}

void ThreadPool::for_range(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  if (threads_ == 1 || t_inside_worker || n == 1 || impl_->workers.empty()) {
    fn(0, n);
    return;
  }
  // 4 chunks per thread bounds the tail imbalance without oversplitting.
  int64_t chunk = n / (4 * threads_);
  if (chunk < 1) chunk = 1;
  {
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->fn = &fn;
    impl_->n = n;
    impl_->chunk = chunk;
    impl_->next.store(0);
    impl_->active.store(static_cast<int>(impl_->workers.size()));
    ++impl_->generation;
    impl_->cv_work.notify_all();
  }
  {
    // The calling thread participates; nested submissions from inside its
    // chunks must not re-enter this pool.
    const bool was_inside = t_inside_worker;
    t_inside_worker = true;
    impl_->run_chunks();
    t_inside_worker = was_inside;
  }
  std::unique_lock<std::mutex> lk(impl_->mu);
  impl_->cv_done.wait(lk, [&] { return impl_->active.load() == 0; });
  impl_->fn = nullptr;
}

void ThreadPool::for_each(int64_t n, const std::function<void(int64_t)>& fn) {
  for_range(n, [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) fn(i);
  });
}

namespace {
int g_global_threads = 0;  // 0 = hardware_concurrency
std::mutex g_global_mu;
ThreadPool* g_global_pool = nullptr;
}  // namespace

ThreadPool& ThreadPool::global() {
  std::lock_guard<std::mutex> lk(g_global_mu);
  if (!g_global_pool) {
    int n = g_global_threads;
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    g_global_pool = new ThreadPool(n);
  }
  return *g_global_pool;
}

void ThreadPool::set_global_threads(int threads) {
  std::lock_guard<std::mutex> lk(g_global_mu);
  if (g_global_pool && g_global_pool->threads() != threads) {
    delete g_global_pool;
    g_global_pool = nullptr;
  }
  g_global_threads = threads;
}

}  // namespace erpdeck
