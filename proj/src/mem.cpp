#include "s5/mem.hpp"

namespace s5::mem {

Counters& counters() {
    static Counters c;
    return c;
}

void add(int64_t bytes) {
    Counters& c = counters();
    c.total_allocated.fetch_add(bytes, std::memory_order_relaxed);
    int64_t now = c.current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    int64_t prev = c.peak.load(std::memory_order_relaxed);
    while (now > prev &&
           !c.peak.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
    }
}

void sub(int64_t bytes) {
    counters().current.fetch_sub(bytes, std::memory_order_relaxed);
}

int64_t current_bytes() { return counters().current.load(std::memory_order_relaxed); }
int64_t peak_bytes() { return counters().peak.load(std::memory_order_relaxed); }
int64_t total_allocated_bytes() {
    return counters().total_allocated.load(std::memory_order_relaxed);
}

void reset_peak() {
    Counters& c = counters();
    c.peak.store(c.current.load(std::memory_order_relaxed), std::memory_order_relaxed);
}

} // namespace s5::mem
