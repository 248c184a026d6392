#pragma once

#include <cstddef>
#include <functional>

namespace certsal {

// Number of worker threads: CERTSAL_THREADS if set, else hardware
// concurrency. max_threads > 0 caps it.
int worker_count(int max_threads = 0);

// Runs fn(task) for task in [0, count) across workers. Task order within a
// worker is ascending; results must be written to per-task slots so the
// outcome cannot depend on the schedule.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  int max_threads = 0);

}  // namespace certsal
