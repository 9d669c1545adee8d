#pragma once

#include <cstddef>
#include <functional>

namespace volc {

// Worker count used by batch-internal loops. Defaults to the hardware
// concurrency; a ScopedWorkers guard overrides it for the current thread.
int worker_count() noexcept;
void set_default_worker_count(int workers) noexcept;

class ScopedWorkers {
 public:
  explicit ScopedWorkers(int workers) noexcept;
  ~ScopedWorkers();
  ScopedWorkers(const ScopedWorkers&) = delete;
  ScopedWorkers& operator=(const ScopedWorkers&) = delete;

 private:
  int previous_;
};

// Runs body(i) for i in [0, n) with a static contiguous partition. Each index
// is processed by exactly one worker, so results never depend on the count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace volc
