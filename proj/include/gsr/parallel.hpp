#pragma once

#include <cstdint>
#include <functional>

namespace gsr {

// Runs fn(block) for block = 0 .. blocks-1.  With jobs <= 1 the calls happen
// inline, in order.  With jobs > 1 a fixed pool of threads pulls block indices
// from a shared counter; each block must write only to its own output slot.
// Because every block sees the same inputs regardless of which thread runs it,
// any reduction that later combines per-block results in block order is
// independent of the thread count.  The first exception thrown by a block is
// rethrown on the calling thread after the pool drains.
void parallel_for_blocks(std::int64_t blocks, int jobs,
                         const std::function<void(std::int64_t)>& fn);

}  // namespace gsr
