#pragma once

#include <cstdint>
#include <functional>

namespace mouthtrace {

/// Upper bound on worker threads for parallel-safe stages (0 = runtime default).
void set_num_threads(int threads);
int num_threads();

/// Runs body(i) for i in [0, count). Work items must write disjoint outputs;
/// results never depend on the thread count.
void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body);

}  // namespace mouthtrace
