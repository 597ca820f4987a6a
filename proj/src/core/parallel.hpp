#pragma once

#include <cstdint>
#include <functional>

namespace mfg {

// Deterministic data parallelism: tasks get fixed contiguous index ranges and
// write only their own slots; any reduction runs in index order after the join.
// Results are therefore independent of the worker count, and worker count 1
// degenerates to a plain loop (the --serial mode).

void set_worker_count(int n);
int worker_count();

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body);

}  // namespace mfg
