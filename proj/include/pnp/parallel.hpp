#pragma once

#include <cstddef>
#include <functional>

namespace pnp {

/// Process-wide cap on worker threads (default 1). Values < 1 are clamped to 1.
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n). Work is split into contiguous static blocks, so
/// every index is processed exactly once by exactly one thread. Callers must only
/// write to per-index outputs; any reduction happens afterwards in index order.
/// Nested calls run serially on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace pnp
