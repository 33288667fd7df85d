#pragma once

#include <cstddef>
#include <functional>

namespace mastoid {

// Worker count used by all internal loops. Defaults to 1.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(lo, hi) over disjoint sub-ranges covering [begin, end).
// Bodies must only write to locations owned by their range.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& body);

// Sum of term(i) for i in [0, n). Partial sums are taken over fixed blocks and
// combined in block order, so the result does not depend on thread_count().
double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& term);

}  // namespace mastoid
