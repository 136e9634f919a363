// Times the serial reference kernels against their parallel variants and
// reports the largest result deviation between the two paths.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qgw/kernels.hpp"
#include "qgw/mm_space.hpp"
#include "qgw/parallel.hpp"
#include "qgw/rng.hpp"

using namespace qgw;
using Clock = std::chrono::steady_clock;

namespace {

template <class F>
double time_best_ms(int reps, const F& body) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        body();
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        best = std::min(best, ms);
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms, double max_diff) {
    std::printf("%-22s %10.3f ms %10.3f ms %8.2fx %12.3g\n", name, serial_ms, parallel_ms,
                parallel_ms > 0 ? serial_ms / parallel_ms : 0.0, max_diff);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs parallel kernel comparison"};
    idx size = 512;
    int reps = 3;
    int threads = 0;
    app.add_option("--size", size, "base problem size");
    app.add_option("--reps", reps, "repetitions (best time kept)");
    app.add_option("--threads", threads, "worker count (0 = hardware)");
    CLI11_PARSE(app, argc, argv);
    parallel::set_threads(threads > 0 ? threads : parallel::hardware_threads());

    Rng rng(9);
    std::printf("threads: %d\n", parallel::threads());
    std::printf("%-22s %13s %13s %9s %12s\n", "kernel", "serial", "parallel", "speedup",
                "max|diff|");

    {
        const idx n = size;
        vec<double> a(n * n), b(n * n), c1(n * n), c2(n * n);
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform();
        const double s = time_best_ms(reps, [&] { kernels::matmul_serial(a.data(), b.data(), c1.data(), n, n, n); });
        const double p = time_best_ms(reps, [&] { kernels::matmul_parallel(a.data(), b.data(), c2.data(), n, n, n); });
        double diff = 0.0;
        for (idx i = 0; i < n * n; ++i) diff = std::max(diff, std::abs(c1[i] - c2[i]));
        report("matmul", s, p, diff);
    }
    {
        const idx n = 2 * size;
        vec<double> m(n * n), w(n);
        for (auto& v : m) v = rng.uniform();
        for (auto& v : w) v = rng.uniform() / static_cast<double>(n);
        double r1 = 0, r2 = 0;
        const double s = time_best_ms(reps, [&] { r1 = kernels::quad_form_sq_serial(m.data(), w.data(), n); });
        const double p = time_best_ms(reps, [&] { r2 = kernels::quad_form_sq_parallel(m.data(), w.data(), n); });
        report("quad_form_sq", s, p, std::abs(r1 - r2));
    }
    {
        const idx n = size * size;
        vec<double> a(n), b(n);
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform();
        double r1 = 0, r2 = 0;
        const double s = time_best_ms(reps, [&] { r1 = kernels::dot_serial(a.data(), b.data(), n); });
        const double p = time_best_ms(reps, [&] { r2 = kernels::dot_parallel(a.data(), b.data(), n); });
        report("dot", s, p, std::abs(r1 - r2));
    }
    {
        const idx count = 4 * size;
        vec<double> coords(count * 3);
        for (auto& v : coords) v = rng.uniform() * 10;
        vec<idx> members(count);
        for (idx i = 0; i < count; ++i) members[i] = i;
        double r1 = 0, r2 = 0;
        const double s = time_best_ms(
            reps, [&] { r1 = kernels::max_pairwise_distance_serial(coords.data(), 3, members); });
        const double p = time_best_ms(
            reps, [&] { r2 = kernels::max_pairwise_distance_parallel(coords.data(), 3, members); });
        report("block_diameter", s, p, std::abs(r1 - r2));
    }
    {
        // Geodesic sweeps from many sources on a grid graph.
        const idx side = std::max<idx>(16, size / 8);
        const idx n = side * side;
        std::vector<GraphEdge> edges;
        for (idx r = 0; r < side; ++r)
            for (idx c = 0; c < side; ++c) {
                if (c + 1 < side) edges.push_back({r * side + c, r * side + c + 1, 1.0});
                if (r + 1 < side) edges.push_back({r * side + c, (r + 1) * side + c, 1.0});
            }
        MmSpace g = MmSpace::from_graph(edges, n);
        vec<idx> sources;
        for (idx s = 0; s < 32 && s < n; ++s) sources.push_back((s * 97) % n);
        vec<double> rows1, rows2;
        const int saved = parallel::threads();
        const double s = time_best_ms(reps, [&] {
            parallel::set_threads(1);
            rows1 = g.batch_row_distances(sources);
        });
        parallel::set_threads(saved);
        const double p = time_best_ms(reps, [&] { rows2 = g.batch_row_distances(sources); });
        double diff = 0.0;
        for (std::size_t i = 0; i < rows1.size(); ++i) diff = std::max(diff, std::abs(rows1[i] - rows2[i]));
        report("geodesic_sweeps", s, p, diff);
    }
    return 0;
}
