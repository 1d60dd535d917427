#include "operant/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace operant::threading {

namespace {

std::atomic<int> g_threads{0};  // 0 = not yet resolved

int resolve_from_env() {
  if (const char* env = std::getenv("OPERANT_THREADS")) {
    const int n = std::atoi(env);
    if (n != 0) return n;
  }
  return 1;
}

int normalize(int n) {
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

void set_thread_count(int n) { g_threads.store(normalize(n)); }

int thread_count() {
  int n = g_threads.load();
  if (n == 0) {
    n = normalize(resolve_from_env());
    g_threads.store(n);
  }
  return n;
}

void parallel_for_chunked(
    std::int64_t n, std::int64_t chunk,
    const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  if (chunk <= 0) chunk = n;
  const std::int64_t nchunks = (n + chunk - 1) / chunk;
  const int workers = thread_count();
  if (workers <= 1 || nchunks == 1) {
    for (std::int64_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::int64_t> next{0};
  auto run = [&] {
    for (std::int64_t c = next.fetch_add(1); c < nchunks; c = next.fetch_add(1))
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(std::min<std::int64_t>(workers, nchunks)) - 1;
  pool.reserve(spawn);
  for (int i = 0; i < spawn; ++i) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

}  // namespace operant::threading
