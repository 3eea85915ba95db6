#pragma once

#include <cstddef>
#include <functional>

namespace ctnet {

/// Process-wide worker count used by parallel_for. Values below 1 mean 1.
void set_worker_count(std::size_t workers);
std::size_t worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks never
/// share an output element, so results do not depend on the worker count.
/// The first exception (lowest chunk) is rethrown after all workers join.
void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  parallel_chunks(n, [&fn](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

/// Restores the previous worker count on scope exit.
class WorkerScope {
 public:
  explicit WorkerScope(std::size_t workers) : previous_(worker_count()) { set_worker_count(workers); }
  ~WorkerScope() { set_worker_count(previous_); }
  WorkerScope(const WorkerScope&) = delete;
  WorkerScope& operator=(const WorkerScope&) = delete;

 private:
  std::size_t previous_;
};

}  // namespace ctnet
