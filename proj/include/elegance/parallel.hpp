#pragma once

#include <exception>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace elegance {

// serial is the reference path; parallel must produce bit-identical results,
// which callers guarantee by writing into per-index slots and reducing in
// index order afterwards.
enum class ExecMode { serial, parallel };

void set_thread_count(int threads);
int thread_count();

template <class Fn>
void parallel_for(int n, ExecMode mode, Fn&& fn) {
  if (mode == ExecMode::serial) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      {
        if (!err) err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace elegance
