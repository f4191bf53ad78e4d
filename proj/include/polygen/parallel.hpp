#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace polygen {

// Worker count actually used for a request (0 = all available).
inline int resolve_threads(int requested) {
#ifdef _OPENMP
  if (requested <= 0) return omp_get_max_threads();
  return requested;
#else
  (void)requested;
  return 1;
#endif
}

// Static-schedule parallel loop; fn(i, thread_rank). Every call with the same
// inputs produces the same per-index results, so callers stay deterministic
// as long as they merge per-index outputs in index order.
template <class F>
void parallel_for(std::int64_t n, int threads, F&& fn) {
  const int p = resolve_threads(threads);
#ifdef _OPENMP
  if (p > 1 && n > 1) {
#pragma omp parallel for num_threads(p) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) fn(i, omp_get_thread_num());
    return;
  }
#endif
  for (std::int64_t i = 0; i < n; ++i) fn(i, 0);
}

}  // namespace polygen
