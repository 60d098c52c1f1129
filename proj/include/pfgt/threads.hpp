#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pfgt {

// Worker-thread cap. PFGT_THREADS in the environment wins; otherwise OpenMP
// keeps its own default. Returns the number of threads kernels will use.
inline int configure_threads() {
#ifdef _OPENMP
  if (const char* env = std::getenv("PFGT_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace pfgt
