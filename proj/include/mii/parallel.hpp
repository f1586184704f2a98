#pragma once

#include <cstddef>
#include <functional>

namespace mii {

/// Worker count: MII_THREADS if set and positive, else hardware concurrency.
int thread_count();

/// Calls fn(i) for i in [0, n). Work is split into contiguous blocks; each index
/// runs exactly once. Exceptions from workers are rethrown (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mii
