// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/threading.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace gspn {
namespace {

int env_default_workers() {
  if (const char* env = std::getenv("GSPN_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int> g_workers{0};  // 0 = not yet initialized

thread_local bool tl_inside_worker = false;

// Lazily started pool. Chunk -> index-range mapping depends only on
// (n, chunk_count), never on which thread picks the chunk up, so scheduling
// cannot change what any chunk computes. The pool is leaked on purpose:
// worker threads stay parked at process exit instead of being joined.
class Pool {
 public:
  static Pool& instance() {
    static Pool* pool = new Pool();
    return *pool;
  }

  void run(int64_t n, int chunks, const std::function<void(int64_t, int64_t)>& fn) {
    std::lock_guard<std::mutex> run_lock(run_mutex_);
    ensure_threads(chunks - 1);
    {
      std::lock_guard<std::mutex> lk(m_);
      job_fn_ = &fn;
      job_n_ = n;
      job_chunks_ = chunks;
      next_chunk_.store(0, std::memory_order_relaxed);
      pending_ = chunks;
      ++generation_;
    }
    cv_work_.notify_all();
    bool saved = tl_inside_worker;
    tl_inside_worker = true;
    work_chunks(&fn, n, chunks);
    tl_inside_worker = saved;
    std::unique_lock<std::mutex> lk(m_);
    cv_done_.wait(lk, [&] { return pending_ == 0; });
    job_fn_ = nullptr;
  }

 private:
  Pool() = default;

  void ensure_threads(int wanted) {
    std::lock_guard<std::mutex> lk(m_);
    while (static_cast<int>(threads_.size()) < wanted) {
      threads_.emplace_back([this] { worker_loop(); });
      threads_.back().detach();
    }
  }

  void worker_loop() {
    tl_inside_worker = true;
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* fn;
      int64_t n;
      int chunks;
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_work_.wait(lk, [&] { return generation_ != seen; });
        seen = generation_;
        fn = job_fn_;
        n = job_n_;
        chunks = job_chunks_;
      }
      work_chunks(fn, n, chunks);
    }
  }

  void work_chunks(const std::function<void(int64_t, int64_t)>* fn, int64_t n, int chunks) {
    if (fn == nullptr) return;
    int done = 0;
    for (;;) {
      int chunk = next_chunk_.fetch_add(1, std::memory_order_relaxed);
      if (chunk >= chunks) break;
      int64_t begin = n * chunk / chunks;
      int64_t end = n * (chunk + 1) / chunks;
      if (begin < end) (*fn)(begin, end);
      ++done;
    }
    std::lock_guard<std::mutex> lk(m_);
    pending_ -= done;
    if (pending_ == 0) cv_done_.notify_all();
  }

  std::mutex run_mutex_;
  std::mutex m_;
  std::condition_variable cv_work_;
  std::condition_variable cv_done_;
  std::vector<std::thread> threads_;
  const std::function<void(int64_t, int64_t)>* job_fn_ = nullptr;
  int64_t job_n_ = 0;
  int job_chunks_ = 0;
  std::atomic<int> next_chunk_{0};
  int pending_ = 0;
  uint64_t generation_ = 0;
};

}  // namespace

int worker_count() {
  int n = g_workers.load(std::memory_order_relaxed);
  if (n == 0) {
    n = env_default_workers();
    g_workers.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_worker_count(int n) { g_workers.store(std::max(1, n), std::memory_order_relaxed); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int workers = worker_count();
  if (workers == 1 || n == 1 || tl_inside_worker) {
    fn(0, n);
    return;
  }
  const int chunks = static_cast<int>(std::min<int64_t>(n, workers));
  Pool::instance().run(n, chunks, fn);
}

}  // namespace gspn
