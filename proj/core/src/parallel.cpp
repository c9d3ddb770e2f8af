#include "iterfilt/parallel.hpp"

#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/global_control.h>
#include <oneapi/tbb/info.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/task_arena.h>

#include <optional>

namespace iterfilt {

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body, std::size_t grain) {
  if (n == 0) return;
  if (n <= grain) {
    body(0, n);
    return;
  }
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, grain),
                    [&](const tbb::blocked_range<std::size_t>& r) { body(r.begin(), r.end()); });
}

void with_thread_limit(std::size_t threads, const std::function<void()>& fn) {
  if (threads == 0) {
    fn();
    return;
  }
  const int n = static_cast<int>(threads);
  // Requests above the core count are honoured (oversubscribed) so that a
  // given thread count behaves the same on every machine.
  std::optional<tbb::global_control> raise;
  if (n > tbb::info::default_concurrency()) raise.emplace(tbb::global_control::max_allowed_parallelism, n);
  tbb::task_arena arena(n);
  arena.execute(fn);
}

}  // namespace iterfilt
