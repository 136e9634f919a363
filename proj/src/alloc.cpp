#include "qgw/alloc.hpp"

namespace qgw::alloc {

Stats& stats() {
    static Stats s;
    return s;
}

void reset_watermarks() {
    auto& s = stats();
    s.peak.store(s.current.load(std::memory_order_relaxed), std::memory_order_relaxed);
    s.max_single.store(0, std::memory_order_relaxed);
}

long long current_values() { return stats().current.load(std::memory_order_relaxed); }
long long peak_values() { return stats().peak.load(std::memory_order_relaxed); }
long long max_single_alloc() { return stats().max_single.load(std::memory_order_relaxed); }

} // namespace qgw::alloc
