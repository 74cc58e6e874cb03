#pragma once

#include <cstddef>
#include <functional>

namespace snptree {

// Number of workers to use: `requested` if > 0, else the SNPTREE_THREADS
// environment variable, else the hardware concurrency.
int resolve_threads(int requested);

// Runs fn(i) for every i in [0, count). Each index is processed exactly once;
// fn must write its result to a per-index slot. Deterministic output requires
// only that fn(i) depends on i alone, not on scheduling.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace snptree
