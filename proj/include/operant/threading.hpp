#pragma once

#include <cstdint>
#include <functional>

namespace operant::threading {

// Worker-count resolution order: set_thread_count() (CLI flag), else the
// OPERANT_THREADS environment variable, else 1.  Zero or negative requests
// resolve to the hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
// Chunk boundaries depend only on (n, chunk); the thread count decides merely
// which worker runs which chunk.  Callers that reduce must combine per-chunk
// results in chunk order so that answers are bitwise stable under any
// thread-count setting.
void parallel_for_chunked(
    std::int64_t n, std::int64_t chunk,
    const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& fn);

}  // namespace operant::threading
