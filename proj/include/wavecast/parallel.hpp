#pragma once

#include <cstddef>
#include <functional>

namespace wavecast {

// Worker cap used by parallel_for when no explicit count is given. Defaults to the
// hardware concurrency; the CLI's --threads flag lowers it.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; callers write results
// by index and combine them afterwards in index order, so output never depends on the
// thread count. The first exception (lowest index) is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0);

}  // namespace wavecast
