#pragma once

#include <atomic>
#include <cstdint>

namespace s5::mem {

// Process-wide accounting of tensor buffer bytes. `current`/`peak` track live
// buffers, `total_allocated` is monotonic so a region's footprint can be read
// as a delta even when buffers are freed in between.
struct Counters {
    std::atomic<int64_t> current{0};
    std::atomic<int64_t> peak{0};
    std::atomic<int64_t> total_allocated{0};
};

Counters& counters();

void add(int64_t bytes);
void sub(int64_t bytes);

int64_t current_bytes();
int64_t peak_bytes();
int64_t total_allocated_bytes();

// Resets peak to the current live size (start of a measured step).
void reset_peak();

// Allocation delta over a scope: bytes of tensor buffers created inside it.
class AllocScope {
  public:
    AllocScope() : start_(total_allocated_bytes()) {}
    int64_t allocated() const { return total_allocated_bytes() - start_; }

  private:
    int64_t start_;
};

} // namespace s5::mem
