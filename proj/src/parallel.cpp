#include "maskrr/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace maskrr {

namespace {
ExecMode g_mode = ExecMode::OpenMP;
int g_threads = 0;
}  // namespace

void set_exec_mode(ExecMode m) { g_mode = m; }
ExecMode exec_mode() { return g_mode; }

void set_thread_count(int n) { g_threads = n < 0 ? 0 : n; }
int thread_count() { return g_threads; }

namespace detail {

void parallel_for_impl(std::size_t n,
                       const std::function<void(std::size_t)>& body) {
#ifdef _OPENMP
  std::exception_ptr err = nullptr;
  const long long nn = static_cast<long long>(n);
  if (g_threads > 0) omp_set_num_threads(g_threads);
#pragma omp parallel for schedule(dynamic, 1) shared(err)
  for (long long i = 0; i < nn; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(maskrr_parallel_err)
      {
        if (!err) err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace detail

}  // namespace maskrr
