#pragma once

#include <cstddef>
#include <functional>

namespace decodewin {

/// Worker count from DECODEWIN_THREADS (0 or unset = hardware concurrency).
unsigned default_thread_count();

/// Runs job(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Jobs must write only to their own output slot; the first exception is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job);

} // namespace decodewin
