#pragma once

#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace countdfm {

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Maps the user-facing threads setting (0 = all cores) to a concrete count.
inline int resolve_threads(int requested) {
  return requested <= 0 ? hardware_threads() : requested;
}

// Data-parallel index loop. Bodies may only write to their own slots and all
// reductions happen serially afterwards, so results are identical for every
// thread count. threads == 1 is the serial reference path.
template <class F>
void parallel_for(int n, int threads, F&& body) {
#ifdef _OPENMP
  if (threads != 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  (void)threads;
  for (int i = 0; i < n; ++i) body(i);
}

}  // namespace countdfm
