#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "viral/nn/param.hpp"

namespace viral::runtime {

// fork-join pool: workers advance disjoint index ranges against read-only
// shared state; the caller blocks until all shards finish
class WorkerPool {
 public:
  explicit WorkerPool(int workers);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int size() const { return workers_; }

  // fn(i) for i in [0, n); contiguous static shards per worker
  void parallel_for(int n, const std::function<void(int)>& fn);

  // fn(shard, lo, hi) once per shard over [0, n)
  void parallel_shards(int n, const std::function<void(int, int, int)>& fn);

 private:
  void worker_loop(int idx);

  int workers_ = 1;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_task_, cv_done_;
  std::function<void(int, int, int)> task_;
  int task_n_ = 0;
  uint64_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

// elementwise mean of identically-laid-out gradient vectors, summed in
// worker-index order so the result is bit-deterministic
nn::ParamVector allreduce_mean(const std::vector<const nn::ParamVector*>& grads);

}  // namespace viral::runtime
