#ifndef NLHOM_CONCURRENCY_HPP
#define NLHOM_CONCURRENCY_HPP

#include <cstddef>
#include <functional>

namespace nlhom {

// Worker cap for the product-grid loops. 0 = hardware concurrency.
// Results are bit-identical for any cap: work items write disjoint slots
// and reductions are merged sequentially in item order.
void set_thread_cap(int threads);
int thread_cap();

// Calls fn(begin, end) on disjoint ranges covering [0, nItems).
// The partition is static; fn must only write slots it owns.
void parallel_chunks(std::size_t nItems,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace nlhom

#endif
