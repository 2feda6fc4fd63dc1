#pragma once

#include <cstddef>
#include <functional>

namespace pam {

// Worker count: PAM_THREADS if set, else the value passed to
// set_default_threads, else hardware concurrency.
int default_threads();
void set_default_threads(int n);

// Runs body(i) for i in [0, n). Bodies must only write to index-private
// state; results are then independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = 0);

}  // namespace pam
