#pragma once

#include <cstddef>
#include <functional>

namespace kgcf {

// Worker count: hardware concurrency, capped by the KGCF_WORKERS environment variable.
std::size_t worker_count();

// Runs body(i) for every i in [0, count). Callers write results into per-index slots
// and merge them in index order, so output never depends on the worker count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t workers = worker_count());

}  // namespace kgcf
