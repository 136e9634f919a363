#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <vector>

namespace qgw::alloc {

/// Element-count accounting for the large numeric buffers. Every container
/// declared through qgw::vec reports its allocations here, which lets tests
/// and the bench harness verify the O(m^2 + N*m) working-set claim and the
/// absence of N*N arrays without an external profiler.
struct Stats {
    std::atomic<long long> current{0};
    std::atomic<long long> peak{0};
    std::atomic<long long> max_single{0};
};

Stats& stats();

/// Resets peak to the currently live count and max_single to zero, so that a
/// following code region can be measured in isolation.
void reset_watermarks();

long long current_values();
long long peak_values();
long long max_single_alloc();

namespace detail {

inline void fetch_max(std::atomic<long long>& target, long long value) {
    long long prev = target.load(std::memory_order_relaxed);
    while (prev < value && !target.compare_exchange_weak(prev, value, std::memory_order_relaxed)) {
    }
}

inline void on_allocate(std::size_t n) {
    auto& s = stats();
    const long long now = s.current.fetch_add(static_cast<long long>(n), std::memory_order_relaxed)
                          + static_cast<long long>(n);
    fetch_max(s.peak, now);
    fetch_max(s.max_single, static_cast<long long>(n));
}

inline void on_deallocate(std::size_t n) {
    stats().current.fetch_sub(static_cast<long long>(n), std::memory_order_relaxed);
}

} // namespace detail

template <class T>
struct CountingAllocator {
    using value_type = T;

    CountingAllocator() noexcept = default;
    template <class U>
    CountingAllocator(const CountingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        detail::on_allocate(n);
        return std::allocator<T>().allocate(n);
    }
    void deallocate(T* p, std::size_t n) noexcept {
        detail::on_deallocate(n);
        std::allocator<T>().deallocate(p, n);
    }

    friend bool operator==(const CountingAllocator&, const CountingAllocator&) { return true; }
    friend bool operator!=(const CountingAllocator&, const CountingAllocator&) { return false; }
};

} // namespace qgw::alloc

namespace qgw {

/// Accounted vector; use for any buffer whose size scales with the data.
template <class T>
using vec = std::vector<T, alloc::CountingAllocator<T>>;

} // namespace qgw
