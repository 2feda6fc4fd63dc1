#include "pam/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>


namespace pam {

namespace {
std::atomic<int> g_threads{0};
}

int default_threads() {
  if (const char* env = std::getenv("PAM_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  if (int n = g_threads.load(); n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_default_threads(int n) { g_threads.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int threads) {
  if (threads <= 0) threads = default_threads();
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  pool.reserve(count);
  for (std::size_t k = 0; k < count; ++k) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pam
