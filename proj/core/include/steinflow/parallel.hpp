#pragma once

#include <cstddef>
#include <functional>

namespace steinflow {

/// Number of worker threads used by data-parallel loops. Defaults to the
/// hardware concurrency, capped by the STEINFLOW_THREADS environment variable.
std::size_t worker_count();

/// Overrides the worker count for the current process (0 restores the
/// environment-derived default).
void set_worker_count(std::size_t workers);

/// Runs body(begin, end) over disjoint chunks of [0, count). Every index is
/// visited by exactly one call, so loops that write one output per index and
/// reduce in a fixed inner order give bit-identical results for any worker
/// count. `min_chunk` bounds how finely the range is split.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 64);

}  // namespace steinflow
