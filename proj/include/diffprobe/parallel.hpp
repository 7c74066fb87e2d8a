#pragma once

#include <cstddef>
#include <functional>

namespace diffprobe {

/// 0 means one worker per hardware thread.
std::size_t resolve_threads(std::size_t requested) noexcept;

/// Calls body(i) for every i in [0, count) on up to `threads` workers.
/// The first exception thrown by any call is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace diffprobe
