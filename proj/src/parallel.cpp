#include "qgw/parallel.hpp"

#include <atomic>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qgw::parallel {

namespace {
std::atomic<int> g_threads{0}; // 0 = not yet initialized
}

int hardware_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void set_threads(int n) {
    if (n < 1) n = 1;
    g_threads.store(n, std::memory_order_relaxed);
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
}

int threads() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n == 0) {
#ifdef _OPENMP
        n = hardware_threads();
#else
        n = 1;
#endif
        g_threads.store(n, std::memory_order_relaxed);
    }
    return n;
}

} // namespace qgw::parallel
