#include "nlhom/concurrency.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace nlhom {

namespace {
std::atomic<int> g_thread_cap{0};
}

void set_thread_cap(int threads) { g_thread_cap.store(threads < 0 ? 0 : threads); }

int thread_cap() {
  int cap = g_thread_cap.load();
  if (cap == 0) {
    unsigned hw = std::thread::hardware_concurrency();
    cap = hw == 0 ? 1 : static_cast<int>(hw);
  }
  return std::max(1, std::min(cap, 64));
}

void parallel_chunks(std::size_t nItems,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  if (nItems == 0) return;
  const std::size_t nWorkers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), nItems);
  if (nWorkers <= 1) {
    fn(0, nItems);
    return;
  }
  const std::size_t chunk = (nItems + nWorkers - 1) / nWorkers;
  std::vector<std::thread> pool;
  pool.reserve(nWorkers - 1);
  for (std::size_t t = 1; t < nWorkers; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(nItems, b + chunk);
    if (b >= e) break;
    pool.emplace_back(fn, b, e);
  }
  fn(0, std::min(nItems, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace nlhom
