// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// Deterministic fork-join helper. parallel_for splits [0, n) into contiguous
// chunks; callers only ever write disjoint outputs per index, so the result
// is bit-identical for every worker count.

#pragma once

#include <cstdint>
#include <functional>

namespace gspn {

// Current worker count. Defaults to GSPN_THREADS if set, else the hardware
// concurrency. Always >= 1.
int worker_count();

// Overrides the worker count (CLI --threads). Must not change any numerical
// output, only the wall time.
void set_worker_count(int n);

// Runs fn over [0, n) in contiguous [begin, end) chunks. Blocks until done.
// Nested calls run inline on the calling worker.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace gspn
