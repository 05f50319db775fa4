#pragma once

#include <cstddef>
#include <functional>

namespace cbo {

/// Number of worker threads used by parallel_for. Defaults to 1.
void set_worker_threads(unsigned count);
unsigned worker_threads();

/// Calls body(i) for every i in [0, n). Work is split into contiguous index
/// chunks; each index is visited exactly once. The body must only write to
/// state owned by its own index, which keeps results independent of the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// RAII override of the worker count for a scope.
class ScopedWorkerThreads {
 public:
  explicit ScopedWorkerThreads(unsigned count) : previous_(worker_threads()) {
    set_worker_threads(count);
  }
  ~ScopedWorkerThreads() { set_worker_threads(previous_); }
  ScopedWorkerThreads(const ScopedWorkerThreads&) = delete;
  ScopedWorkerThreads& operator=(const ScopedWorkerThreads&) = delete;

 private:
  unsigned previous_;
};

}  // namespace cbo
