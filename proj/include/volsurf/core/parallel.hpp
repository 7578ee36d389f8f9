// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace volsurf {

/// Worker count: VOLSURF_THREADS if set and positive, else hardware concurrency.
int default_thread_count();

/// Overrides the worker count for the rest of the process (0 restores the default).
void set_thread_count(int threads);

/// Calls body(begin, end) over disjoint chunks of [0, count). Chunk boundaries
/// depend only on count and grain, never on the number of workers.
void parallel_for(std::size_t count, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace volsurf
