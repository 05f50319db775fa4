#include "cbo/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace cbo {
namespace {

thread_local bool t_inside_region = false;

struct Job {
  const std::function<void(std::size_t)>* body;
  std::size_t n;
  std::size_t chunks;
  std::atomic<std::size_t> next_chunk{0};
  std::size_t finished = 0;  // guarded by WorkerPool::mutex_
  std::exception_ptr error;  // guarded by WorkerPool::mutex_
};

class WorkerPool {
 public:
  explicit WorkerPool(unsigned helpers) {
    workers_.reserve(helpers);
    for (unsigned i = 0; i < helpers; ++i) workers_.emplace_back([this] { worker_loop(); });
  }

  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
      ++generation_;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
  }

  void run(std::size_t n, const std::function<void(std::size_t)>& body) {
    std::lock_guard call_lock(call_mutex_);
    auto job = std::make_shared<Job>();
    job->body = &body;
    job->n = n;
    job->chunks = std::min(n, (workers_.size() + 1) * 4);
    {
      std::lock_guard lock(mutex_);
      job_ = job;
      ++generation_;
    }
    wake_.notify_all();
    drain(*job);
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return job->finished == job->chunks; });
    job_.reset();
    if (job->error) std::rethrow_exception(job->error);
  }

 private:
  void worker_loop() {
    t_inside_region = true;
    std::uint64_t seen = 0;
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stopping_) return;
        job = job_;
      }
      if (job) drain(*job);
    }
  }

  void drain(Job& job) {
    const bool was_inside = t_inside_region;
    t_inside_region = true;
    std::size_t completed = 0;
    std::exception_ptr error;
    for (;;) {
      const std::size_t c = job.next_chunk.fetch_add(1);
      if (c >= job.chunks) break;
      const std::size_t begin = job.n * c / job.chunks;
      const std::size_t end = job.n * (c + 1) / job.chunks;
      try {
        for (std::size_t i = begin; i < end; ++i) (*job.body)(i);
      } catch (...) {
        if (!error) error = std::current_exception();
      }
      ++completed;
    }
    t_inside_region = was_inside;
    if (completed > 0) {
      std::lock_guard lock(mutex_);
      if (error && !job.error) job.error = error;
      job.finished += completed;
      if (job.finished == job.chunks) done_.notify_all();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex call_mutex_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  std::shared_ptr<Job> job_;
  std::uint64_t generation_ = 0;
  bool stopping_ = false;
};

std::mutex g_config_mutex;
unsigned g_threads = 1;
std::shared_ptr<WorkerPool> g_pool;

}  // namespace

void set_worker_threads(unsigned count) {
  count = std::max(1u, count);
  std::lock_guard lock(g_config_mutex);
  if (count == g_threads) return;
  g_threads = count;
  g_pool = count > 1 ? std::make_shared<WorkerPool>(count - 1) : nullptr;
}

unsigned worker_threads() {
  std::lock_guard lock(g_config_mutex);
  return g_threads;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  std::shared_ptr<WorkerPool> pool;
  if (!t_inside_region) {
    std::lock_guard lock(g_config_mutex);
    pool = g_pool;
  }
  if (!pool || n == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  pool->run(n, body);
}

}  // namespace cbo
