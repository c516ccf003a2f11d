#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lgap {

/// Process-wide worker count used by blocked computations. 0 or 1 runs inline.
void set_thread_count(unsigned n) noexcept;
unsigned thread_count() noexcept;

/// Runs fn(task) for task in [0, tasks). Tasks are distributed round-robin;
/// callers must write results into per-task slots and reduce in task order so
/// results do not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t tasks, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) fn(t);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = w; t < tasks; t += workers) fn(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lgap
