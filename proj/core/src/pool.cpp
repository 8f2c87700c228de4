#include "viral/runtime/pool.hpp"

#include "viral/errors.hpp"

namespace viral::runtime {

WorkerPool::WorkerPool(int workers) : workers_(workers < 1 ? 1 : workers) {
  for (int i = 1; i < workers_; ++i)
    threads_.emplace_back([this, i] { worker_loop(i); });
}

WorkerPool::~WorkerPool() {
  {
    std::unique_lock<std::mutex> lock(mu_);
    stop_ = true;
  }
  cv_task_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::worker_loop(int idx) {
  uint64_t seen = 0;
  for (;;) {
    std::function<void(int, int, int)> task;
    int n = 0;
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_task_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      task = task_;
      n = task_n_;
    }
    const int lo = static_cast<int>(static_cast<int64_t>(n) * idx / workers_);
    const int hi = static_cast<int>(static_cast<int64_t>(n) * (idx + 1) / workers_);
    if (lo < hi) task(idx, lo, hi);
    {
      std::unique_lock<std::mutex> lock(mu_);
      if (--pending_ == 0) cv_done_.notify_one();
    }
  }
}

void WorkerPool::parallel_shards(int n, const std::function<void(int, int, int)>& fn) {
  if (n <= 0) return;
  if (workers_ == 1) {
    fn(0, 0, n);
    return;
  }
  {
    std::unique_lock<std::mutex> lock(mu_);
    task_ = fn;
    task_n_ = n;
    pending_ = workers_ - 1;
    ++generation_;
  }
  cv_task_.notify_all();
  const int hi0 = static_cast<int>(static_cast<int64_t>(n) / workers_);
  if (hi0 > 0) fn(0, 0, hi0);
  std::unique_lock<std::mutex> lock(mu_);
  cv_done_.wait(lock, [&] { return pending_ == 0; });
}

void WorkerPool::parallel_for(int n, const std::function<void(int)>& fn) {
  parallel_shards(n, [&](int, int lo, int hi) {
    for (int i = lo; i < hi; ++i) fn(i);
  });
}

nn::ParamVector allreduce_mean(const std::vector<const nn::ParamVector*>& grads) {
  if (grads.empty()) throw NumericError("allreduce_mean: no gradients");
  nn::ParamVector out = grads[0]->zeros_like();
  for (const nn::ParamVector* g : grads) {
    if (!g->same_layout(out))
      throw NumericError("allreduce_mean: gradient layout mismatch");
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += g->data[i];
  }
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (double& v : out.data) v *= inv;
  return out;
}

}  // namespace viral::runtime
