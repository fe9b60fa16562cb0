// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

namespace gmatch {

// Worker count for OpenMP regions: min(omp max threads, GM_THREADS) when the
// environment variable is set, otherwise omp max threads.
int thread_count();

}  // namespace gmatch
