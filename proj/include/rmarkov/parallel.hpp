#pragma once

// Thin OpenMP shim so the library also builds without -fopenmp.

#if defined(_OPENMP)
#include <omp.h>
#else
inline int omp_get_max_threads() { return 1; }
inline int omp_get_thread_num() { return 0; }
inline int omp_get_num_threads() { return 1; }
inline void omp_set_num_threads(int) {}
#endif

namespace rmarkov {

/// Number of worker threads used by job-level loops.
inline int max_threads() { return omp_get_max_threads(); }

inline void set_max_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace rmarkov
