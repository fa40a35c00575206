#pragma once

#include <cstddef>
#include <functional>

namespace dopt {

/// Worker count used by parallel_for. Defaults to $DOPT_THREADS when set,
/// otherwise the hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs fn(i) for i in [0, count). If any call throws, the exception from the
/// lowest failing index is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace dopt
