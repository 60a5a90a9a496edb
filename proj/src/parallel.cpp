#include "gsr/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gsr {

void parallel_for_blocks(std::int64_t blocks, int jobs,
                         const std::function<void(std::int64_t)>& fn) {
  if (blocks <= 0) return;
  const int workers =
      static_cast<int>(std::min<std::int64_t>(std::max(jobs, 1), blocks));
  if (workers == 1) {
    for (std::int64_t b = 0; b < blocks; ++b) fn(b);
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto drain = [&] {
    while (!abort.load(std::memory_order_relaxed)) {
      const std::int64_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= blocks) return;
      try {
        fn(b);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        abort.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(drain);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gsr
