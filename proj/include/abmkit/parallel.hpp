#pragma once

#include <cstddef>
#include <functional>

namespace abmkit {

/// Worker cap: ABMKIT_THREADS if set (minimum 1), else hardware concurrency.
std::size_t max_threads();

/// Runs fn(0..n) across up to max_threads() threads. Iterations must be
/// independent and write only to their own output slots; any exception is
/// rethrown on the caller. Results are deterministic as long as iterations
/// do not share mutable state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace abmkit
