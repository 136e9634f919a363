#include "qgw/bench.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "qgw/gw.hpp"
#include "qgw/io.hpp"
#include "qgw/partitioning.hpp"
#include "qgw/qgw.hpp"
#include "qgw/rng.hpp"

namespace qgw::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string frac_label(double frac) {
    std::ostringstream out;
    out << "qgw-f" << frac;
    return out.str();
}

} // namespace

vec<double> make_blobs(idx n, std::uint64_t seed, int clusters, double side, double spread) {
    if (n < 1) throw ValidationError("blob cloud needs n >= 1");
    if (clusters < 1) throw ValidationError("blob cloud needs at least one cluster");
    Rng rng(seed);
    vec<double> centers(static_cast<std::size_t>(clusters) * 2, 0.0);
    for (auto& c : centers) c = rng.uniform() * side;
    vec<double> coords(static_cast<std::size_t>(n) * 2, 0.0);
    for (idx i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % clusters);
        coords[static_cast<std::size_t>(i) * 2] =
            centers[static_cast<std::size_t>(c) * 2] + spread * rng.normal();
        coords[static_cast<std::size_t>(i) * 2 + 1] =
            centers[static_cast<std::size_t>(c) * 2 + 1] + spread * rng.normal();
    }
    return coords;
}

std::vector<BenchRow> run_relerr_suite(const BenchOptions& options) {
    std::vector<BenchRow> rows;
    for (idx n : options.sizes) {
        if (n * n > 1000000)
            throw ValidationError("relerr suite needs N^2 <= 10^6 for the dense reference");
        for (int trial = 0; trial < options.trials; ++trial) {
            const std::uint64_t pair_tag =
                Rng::mix(static_cast<std::uint64_t>(n) * 1000003ULL + static_cast<std::uint64_t>(trial));
            MmSpace x = MmSpace::from_points(make_blobs(n, Rng::derive(options.seed, pair_tag)), n, 2);
            MmSpace y = MmSpace::from_points(
                make_blobs(n, Rng::derive(options.seed, pair_tag ^ 0x5bd1e995ULL)), n, 2);
            const vec<double> dx = x.full_distance_matrix();
            const vec<double> dy = y.full_distance_matrix();
            const DiscreteCoupling product = DiscreteCoupling::product(x.measure(), y.measure());
            const double loss_product = gw_loss(dx, n, dy, n, product);

            alloc::reset_watermarks();
            auto t = Clock::now();
            const GwSolveResult reference =
                solve_gw(dx, n, dy, n, x.measure(), y.measure());
            BenchRow ref_row;
            ref_row.n = n;
            ref_row.method = "gw";
            ref_row.loss = reference.loss;
            ref_row.relative_error = 1.0;
            ref_row.has_relative_error = true;
            ref_row.seconds = seconds_since(t);
            ref_row.peak_values = alloc::peak_values();
            rows.push_back(ref_row);

            const double gap = loss_product - reference.loss;
            for (double frac : options.fracs) {
                PartitionConfig pc;
                pc.method = PartitionMethod::voronoi;
                pc.sample_fraction = frac;
                QgwConfig qc_config;
                qc_config.compute_bounds = false;
                qc_config.compute_full_loss = false;

                alloc::reset_watermarks();
                t = Clock::now();
                pc.seed = Rng::derive(options.seed, pair_tag ^ 0xa5a5a5a5ULL);
                const PointedPartition px = voronoi_partition(x, pc);
                pc.seed = Rng::derive(options.seed, pair_tag ^ 0xc3c3c3c3ULL);
                const PointedPartition py = voronoi_partition(y, pc);
                auto [coupling, report] = match_qgw(x, px, y, py, qc_config);
                BenchRow row;
                row.seconds = seconds_since(t);
                row.peak_values = alloc::peak_values();
                row.n = n;
                row.method = frac_label(frac);
                row.loss = gw_loss(dx, n, dy, n, densify_small(coupling));
                if (std::abs(gap) > 1e-12 * std::max(std::abs(loss_product), 1.0)) {
                    row.relative_error = (loss_product - row.loss) / gap;
                    row.has_relative_error = true;
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::vector<BenchRow> run_scaling_suite(const BenchOptions& options) {
    std::vector<BenchRow> rows;
    for (idx n : options.sizes) {
        for (int trial = 0; trial < options.trials; ++trial) {
            const std::uint64_t pair_tag =
                Rng::mix(static_cast<std::uint64_t>(n) * 1000003ULL + static_cast<std::uint64_t>(trial));
            MmSpace x = MmSpace::from_points(make_blobs(n, Rng::derive(options.seed, pair_tag)), n, 2);
            MmSpace y = MmSpace::from_points(
                make_blobs(n, Rng::derive(options.seed, pair_tag ^ 0x5bd1e995ULL)), n, 2);
            const int m = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n))));

            alloc::reset_watermarks();
            const auto t = Clock::now();
            PartitionConfig pc;
            pc.method = PartitionMethod::voronoi;
            pc.m = m;
            pc.seed = Rng::derive(options.seed, pair_tag ^ 0xa5a5a5a5ULL);
            const PointedPartition px = voronoi_partition(x, pc);
            pc.seed = Rng::derive(options.seed, pair_tag ^ 0xc3c3c3c3ULL);
            const PointedPartition py = voronoi_partition(y, pc);
            QgwConfig config;
            config.compute_bounds = false;
            config.compute_full_loss = false;
            auto [coupling, report] = match_qgw(x, px, y, py, config);

            BenchRow row;
            row.seconds = seconds_since(t);
            row.peak_values = alloc::peak_values();
            row.n = n;
            row.method = "qgw-scaling";
            row.loss = report.global_loss;
            if (alloc::max_single_alloc() >= static_cast<long long>(n) * static_cast<long long>(n))
                throw NumericalError("scaling run allocated an N x N value array");
            rows.push_back(row);
        }
    }
    return rows;
}

std::string to_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "N,method,loss,relative_error,seconds,peak_values_allocated\n";
    for (const auto& r : rows) {
        out << r.n << ',' << r.method << ',' << io::format_double(r.loss) << ',';
        if (r.has_relative_error) out << io::format_double(r.relative_error);
        out << ',' << io::format_double(r.seconds) << ',' << r.peak_values << '\n';
    }
    return out.str();
}

} // namespace qgw::bench
