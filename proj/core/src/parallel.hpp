#pragma once

#include <cstddef>
#include <functional>

namespace hpomdp::detail {

// Runs body(i) for every i in [0, count) on up to `threads` workers. Work items are
// claimed dynamically; callers must write results into per-index slots so the outcome
// does not depend on scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace hpomdp::detail
