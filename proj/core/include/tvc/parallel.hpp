#pragma once

#include <cstddef>
#include <functional>

namespace tvc {

// Resolves a thread-count request: n > 0 is taken as-is; n <= 0 falls back to
// the TVC_THREADS environment variable, then hardware concurrency.
int resolve_threads(int requested);

// Runs body(i) for i in [0, n). Work items must be independent and write only
// to their own slots; results are then identical for any thread count.
// The first exception thrown by a body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = 0);

}  // namespace tvc
