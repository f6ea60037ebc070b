#pragma once

#include <cstddef>
#include <functional>

namespace splatprint {

// Number of worker threads: min(hardware, SPLATPRINT_THREADS if set).
int thread_budget();

// Runs fn(chunk_index) for chunk_index in [0, chunk_count). Chunking is chosen
// by the caller, never by the thread count, so results that are reduced in
// chunk order do not depend on how many workers ran.
void parallel_for_chunks(int chunk_count, const std::function<void(int)>& fn);

}  // namespace splatprint
