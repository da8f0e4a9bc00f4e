#pragma once

#include <cstdint>
#include <functional>

namespace orbsde::detail {

// Worker cap: OBLIQUE_RBSDE_THREADS, where 0 or unset means one worker per
// hardware thread. Read on every call so tests can adjust the environment.
int worker_count();

// Splits [0, n) into one contiguous chunk per worker and runs
// fn(begin, end, slot) on each. Slots are dense 0..workers-1 so callers can
// keep per-slot accumulators and merge them in slot order, which keeps
// reductions deterministic whatever the thread count.
// Returns the number of slots used.
int parallel_chunks(std::uint64_t n,
                    const std::function<void(std::uint64_t, std::uint64_t, int)>& fn);

} // namespace orbsde::detail
