#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace maskrr {

// Execution backend for data-parallel loops.  Serial is the reference
// implementation; OpenMP must produce byte-identical results, which holds
// because loop bodies write only to disjoint, preallocated slots and all
// reductions are performed serially afterwards in fixed index order.
enum class ExecMode { Serial, OpenMP };

void set_exec_mode(ExecMode m);
ExecMode exec_mode();

// 0 means "let OpenMP decide" (its default thread count).
void set_thread_count(int n);
int thread_count();

namespace detail {
void parallel_for_impl(std::size_t n, const std::function<void(std::size_t)>& body);
}

// Runs body(i) for i in [0, n).  Bodies must be independent and write only
// to their own output slots.  Exceptions are captured and rethrown (first
// one wins) after the loop completes.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  if (exec_mode() == ExecMode::Serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  detail::parallel_for_impl(n, std::function<void(std::size_t)>(std::forward<F>(body)));
}

}  // namespace maskrr
