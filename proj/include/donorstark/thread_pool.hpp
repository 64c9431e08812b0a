#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace dstark {

// Fixed-size worker pool with deterministic work decomposition.
//
// All parallel loops are split into chunks whose boundaries depend only on
// the problem size, never on the worker count. Reductions store one partial
// per chunk and combine them serially in chunk order, so results are
// bit-identical for any number of workers (including zero, which runs the
// loop inline).
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t workers = 0) { start(workers); }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() { stop(); }

  std::size_t worker_count() const { return threads_.size(); }

  // Runs fn(chunk_index, begin, end) over [0, n) split into fixed chunks.
  // Chunk layout depends only on n and chunk_size.
  void parallel_chunks(std::size_t n, std::size_t chunk_size,
                       const std::function<void(std::size_t, std::size_t,
                                                std::size_t)>& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    if (threads_.empty() || n_chunks == 1) {
      for (std::size_t c = 0; c < n_chunks; ++c) {
        const std::size_t b = c * chunk_size;
        fn(c, b, std::min(n, b + chunk_size));
      }
      return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
        if (c >= n_chunks) return;
        const std::size_t b = c * chunk_size;
        fn(c, b, std::min(n, b + chunk_size));
      }
    };
    run_on_all(worker);
  }

  // Deterministic sum reduction: partial per chunk, serial combine in
  // chunk order.
  template <typename T, typename ChunkFn>
  T reduce_chunks(std::size_t n, std::size_t chunk_size, T init,
                  const ChunkFn& chunk_fn) {
    if (n == 0) return init;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    std::vector<T> partials(n_chunks, T{});
    parallel_chunks(n, chunk_size,
                    [&](std::size_t c, std::size_t b, std::size_t e) {
                      partials[c] = chunk_fn(b, e);
                    });
    T acc = init;
    for (std::size_t c = 0; c < n_chunks; ++c) acc += partials[c];
    return acc;
  }

 private:
  void start(std::size_t workers) {
    if (workers <= 1) return;  // inline execution
    threads_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) {
      threads_.emplace_back([this]() { thread_main(); });
    }
  }

  void stop() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      shutdown_ = true;
      cv_.notify_all();
    }
    for (auto& t : threads_) t.join();
    threads_.clear();
  }

  // Blocks until every worker has executed fn once.
  void run_on_all(const std::function<void()>& fn) {
    std::unique_lock<std::mutex> lk(mu_);
    job_ = fn;
    ++generation_;
    pending_ = threads_.size();
    cv_.notify_all();
    done_cv_.wait(lk, [&]() { return pending_ == 0; });
    job_ = nullptr;
  }

  void thread_main() {
    std::uint64_t seen = 0;
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&]() { return shutdown_ || generation_ != seen; });
        if (shutdown_) return;
        seen = generation_;
        job = job_;
      }
      job();
      {
        std::unique_lock<std::mutex> lk(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::function<void()> job_;
  std::uint64_t generation_ = 0;
  std::size_t pending_ = 0;
  bool shutdown_ = false;
};

}  // namespace dstark
