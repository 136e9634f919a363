#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qgw/kernels.hpp"
#include "qgw/parallel.hpp"
#include "qgw/rng.hpp"

// Absolute-tolerance comparison; doctest's Approx is relative.
#define CHECK_ABS(a, b, tol) CHECK(std::abs((a) - (b)) <= (tol))

using namespace qgw;

namespace {

vec<double> random_values(Rng& rng, idx count, double scale = 1.0) {
    vec<double> out(static_cast<std::size_t>(count));
    for (auto& v : out) v = rng.uniform() * scale;
    return out;
}

struct ThreadGuard {
    int saved;
    explicit ThreadGuard(int n) : saved(parallel::threads()) { parallel::set_threads(n); }
    ~ThreadGuard() { parallel::set_threads(saved); }
};

} // namespace

TEST_CASE("matmul agrees with a naive triple loop and its parallel twin bitwise") {
    Rng rng(1);
    const idx n = 17, p = 23, k = 11;
    const vec<double> a = random_values(rng, n * p);
    const vec<double> b = random_values(rng, p * k);
    vec<double> naive(static_cast<std::size_t>(n * k), 0.0);
    for (idx i = 0; i < n; ++i)
        for (idx j = 0; j < k; ++j) {
            double s = 0.0;
            for (idx l = 0; l < p; ++l)
                s += a[static_cast<std::size_t>(i * p + l)] * b[static_cast<std::size_t>(l * k + j)];
            naive[static_cast<std::size_t>(i * k + j)] = s;
        }
    vec<double> serial(static_cast<std::size_t>(n * k), 0.0);
    vec<double> par(static_cast<std::size_t>(n * k), 0.0);
    kernels::matmul_serial(a.data(), b.data(), serial.data(), n, p, k);
    {
        ThreadGuard guard(4);
        kernels::matmul_parallel(a.data(), b.data(), par.data(), n, p, k);
    }
    for (idx c = 0; c < n * k; ++c) {
        CHECK_ABS(serial[static_cast<std::size_t>(c)], naive[static_cast<std::size_t>(c)], 1e-13);
        CHECK(par[static_cast<std::size_t>(c)] == serial[static_cast<std::size_t>(c)]);
    }
}

TEST_CASE("dot and quad_form parallel variants match the serial reference") {
    Rng rng(2);
    const idx n = 401;
    const vec<double> a = random_values(rng, n * n);
    const vec<double> b = random_values(rng, n * n);
    const vec<double> w = random_values(rng, n, 1.0 / static_cast<double>(n));

    const double dot_ref = kernels::dot_serial(a.data(), b.data(), n * n);
    const double quad_ref = kernels::quad_form_sq_serial(a.data(), w.data(), n);
    // partial-sum merging reorders additions, so agreement is relative
    for (int threads : {1, 2, 3, 8}) {
        ThreadGuard guard(threads);
        CHECK_ABS(kernels::dot_parallel(a.data(), b.data(), n * n), dot_ref,
                  1e-12 * std::abs(dot_ref));
        CHECK_ABS(kernels::quad_form_sq_parallel(a.data(), w.data(), n), quad_ref,
                  1e-12 * std::abs(quad_ref) + 1e-15);
    }
    // fixed thread count twice: bitwise identical
    ThreadGuard guard(3);
    CHECK(kernels::dot_parallel(a.data(), b.data(), n * n) ==
          kernels::dot_parallel(a.data(), b.data(), n * n));
}

TEST_CASE("pairwise-distance scans match a naive scan") {
    Rng rng(3);
    const idx count = 150;
    const vec<double> coords = random_values(rng, count * 3, 5.0);
    vec<idx> members;
    for (idx i = 0; i < count; i += 2) members.push_back(i);
    double naive = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b) {
            double s = 0.0;
            for (idx d = 0; d < 3; ++d) {
                const double diff = coords[static_cast<std::size_t>(members[a] * 3 + d)] -
                                    coords[static_cast<std::size_t>(members[b] * 3 + d)];
                s += diff * diff;
            }
            naive = std::max(naive, std::sqrt(s));
        }
    const double serial = kernels::max_pairwise_distance_serial(coords.data(), 3, members);
    CHECK_ABS(serial, naive, 1e-12);
    ThreadGuard guard(4);
    CHECK(kernels::max_pairwise_distance_parallel(coords.data(), 3, members) == serial);
}

TEST_CASE("matrix-based diameter scan") {
    Rng rng(4);
    const idx n = 30;
    vec<double> m(static_cast<std::size_t>(n * n), 0.0);
    for (idx i = 0; i < n; ++i)
        for (idx j = i + 1; j < n; ++j) {
            const double v = rng.uniform();
            m[static_cast<std::size_t>(i * n + j)] = v;
            m[static_cast<std::size_t>(j * n + i)] = v;
        }
    vec<idx> all(static_cast<std::size_t>(n));
    for (idx i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    double naive = 0.0;
    for (double v : m) naive = std::max(naive, v);
    CHECK(kernels::max_pairwise_from_matrix_serial(m.data(), n, all) == naive);
    ThreadGuard guard(2);
    CHECK(kernels::max_pairwise_from_matrix_parallel(m.data(), n, all) == naive);
}
