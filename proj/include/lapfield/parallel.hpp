#pragma once

#include <functional>

namespace lapfield {

/// Worker count used for per-channel / per-item loops. Defaults to 1 so
/// that runs are reproducible unless parallelism is requested.
void set_thread_count(int n);
int thread_count() noexcept;

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; with
/// more than one thread the indices are split across std::threads. Callers
/// write results into per-index slots so the outcome does not depend on
/// scheduling.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace lapfield
