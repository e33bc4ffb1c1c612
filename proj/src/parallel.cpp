#include "mouthtrace/parallel.hpp"

#ifdef MOUTHTRACE_HAVE_OPENMP
#include <omp.h>
#endif

namespace mouthtrace {

void set_num_threads(int threads) {
#ifdef MOUTHTRACE_HAVE_OPENMP
  omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
#else
  (void)threads;
#endif
}

int num_threads() {
#ifdef MOUTHTRACE_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body) {
#ifdef MOUTHTRACE_HAVE_OPENMP
  if (count > 1 && omp_get_max_threads() > 1) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
#endif
  for (std::int64_t i = 0; i < count; ++i) body(i);
}

}  // namespace mouthtrace
