#pragma once

#include <functional>

namespace sepca {

// Worker cap for library loops. 0 restores the default (hardware concurrency).
void set_threads(int n);
int threads();

// Calls fn(begin, end) on contiguous chunks of [0, n). Chunk boundaries depend
// only on n and the thread count, so results are reproducible.
void parallel_for(long n, const std::function<void(long, long)>& fn, long min_chunk = 1);

}  // namespace sepca
