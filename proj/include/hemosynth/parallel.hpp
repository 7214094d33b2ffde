#pragma once

#include <cstddef>
#include <functional>

namespace hemosynth {

/// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency).
/// Rethrows the first exception after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

unsigned resolve_threads(unsigned requested);

}  // namespace hemosynth
