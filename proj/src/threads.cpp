// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/threads.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace gmatch {

int thread_count() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("GM_THREADS")) {
    try {
      int cap = std::stoi(env);
      if (cap >= 1 && cap < n) n = cap;
    } catch (...) {
      // ignore malformed values
    }
  }
  return n;
}

}  // namespace gmatch
