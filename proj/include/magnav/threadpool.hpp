#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace magnav {

// Fixed-size pool dispatching indexed jobs.  Work is partitioned by job
// index, never by thread, so results do not depend on the thread count;
// with one thread everything runs inline.  The slot argument identifies
// which of the `size()` scratch areas the job may use: slots of
// concurrently running jobs never collide, but which slot a job lands
// in is not deterministic, so slots must only hold transient scratch.
class ThreadPool {
 public:
  explicit ThreadPool(int threads) : threads_(threads < 1 ? 1 : threads) {
    for (int i = 0; i < threads_ - 1; ++i)
      workers_.emplace_back([this, i] { worker_loop(i + 1); });
  }

  ~ThreadPool() {
    {
      std::unique_lock lock(mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int size() const { return threads_; }

  void run_slotted(int njobs, const std::function<void(int, int)>& fn) {
    if (njobs <= 0) return;
    if (threads_ == 1 || njobs == 1) {
      for (int j = 0; j < njobs; ++j) fn(j, 0);
      return;
    }
    {
      std::unique_lock lock(mutex_);
      fn_ = &fn;
      njobs_ = njobs;
      next_job_.store(0, std::memory_order_relaxed);
      remaining_ = njobs;
      generation_++;
    }
    wake_.notify_all();
    drain(0);
    // The counters must stay untouched until every worker has left
    // drain(), hence the active-worker condition.
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return remaining_ == 0 && active_ == 0; });
    fn_ = nullptr;
  }

  void run(int njobs, const std::function<void(int)>& fn) {
    run_slotted(njobs, [&fn](int j, int) { fn(j); });
  }

 private:
  void drain(int slot) {
    for (;;) {
      int j = next_job_.fetch_add(1, std::memory_order_relaxed);
      if (j >= njobs_) return;
      (*fn_)(j, slot);
      std::unique_lock lock(mutex_);
      if (--remaining_ == 0) done_.notify_all();
    }
  }

  void worker_loop(int slot) {
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
        if (stopping_) return;
        seen = generation_;
        active_++;
      }
      drain(slot);
      {
        std::unique_lock lock(mutex_);
        if (--active_ == 0 && remaining_ == 0) done_.notify_all();
      }
    }
  }

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_, done_;
  const std::function<void(int, int)>* fn_ = nullptr;
  int njobs_ = 0;
  std::atomic<int> next_job_{0};
  int remaining_ = 0;
  int active_ = 0;
  uint64_t generation_ = 0;
  bool stopping_ = false;
};

}  // namespace magnav
