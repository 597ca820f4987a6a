#include "core/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "core/errors.hpp"

namespace mfg {

namespace {
std::atomic<int> g_workers{
    std::max(1, static_cast<int>(std::min(4u, std::thread::hardware_concurrency())))};
}

void set_worker_count(int n) { g_workers.store(std::max(1, n)); }

int worker_count() { return g_workers.load(); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body) {
  const int workers = static_cast<int>(std::min<std::int64_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::mutex err_mu;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t b = w * chunk;
    const std::int64_t e = std::min(n, b + chunk);
    pool.emplace_back([&, b, e]() {
      try {
        for (std::int64_t i = b; i < e; ++i) body(i);
      } catch (...) {
        if (!failed.exchange(true)) {
          std::lock_guard<std::mutex> lk(err_mu);
          first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mfg
