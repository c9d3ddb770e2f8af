#pragma once

#include <cstddef>
#include <functional>

namespace iterfilt {

/// Runs body(i) for i in [0, n) on the ambient TBB arena. Bodies must not
/// depend on execution order; exceptions propagate to the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& body,
                  std::size_t grain = 64);

/// Runs `fn` inside an arena limited to `threads` workers (0 = automatic).
void with_thread_limit(std::size_t threads, const std::function<void()>& fn);

}  // namespace iterfilt
