// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line each. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qgw/bench.hpp"
#include "qgw/diagnostics.hpp"
#include "qgw/gw.hpp"
#include "qgw/io.hpp"
#include "qgw/parallel.hpp"
#include "qgw/partitioning.hpp"
#include "qgw/qgw.hpp"
#include "qgw/rng.hpp"

using namespace qgw;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli_path = "./qgw";

MmSpace random_cloud(Rng& rng, idx n, idx dim, double scale = 4.0) {
    vec<double> coords(static_cast<std::size_t>(n * dim));
    for (auto& v : coords) v = rng.uniform() * scale;
    return MmSpace::from_points(std::move(coords), n, dim);
}

PointedPartition random_voronoi(const MmSpace& s, int m, std::uint64_t seed) {
    PartitionConfig c;
    c.method = PartitionMethod::voronoi;
    c.m = m;
    c.seed = seed;
    return voronoi_partition(s, c);
}

Atoms1D random_atoms(Rng& rng, idx count) {
    Atoms1D a;
    double total = 0.0;
    for (idx i = 0; i < count; ++i) {
        a.positions.push_back(rng.uniform() * 10.0 - 5.0);
        const double m = rng.uniform() + 0.01;
        a.masses.push_back(m);
        total += m;
    }
    for (auto& m : a.masses) m /= total;
    return a;
}

std::string check_le(double value, double bound, const std::string& what) {
    if (value <= bound) return {};
    std::ostringstream out;
    out << what << ": " << value << " > " << bound;
    return out.str();
}

// --------------------------------------------------------------- criteria

std::string c1_one_dimensional_oracle() {
    Rng rng(101);
    for (int trial = 0; trial < 120; ++trial) {
        const Atoms1D a = random_atoms(rng, 1 + static_cast<idx>(rng.below(8)));
        const Atoms1D b = random_atoms(rng, 1 + static_cast<idx>(rng.below(8)));
        const Plan1DResult fast = solve_1d_ot(a, b);
        const idx n = static_cast<idx>(a.positions.size());
        const idx k = static_cast<idx>(b.positions.size());
        vec<double> cost(static_cast<std::size_t>(n * k), 0.0);
        for (idx i = 0; i < n; ++i)
            for (idx j = 0; j < k; ++j) {
                const double d = a.positions[static_cast<std::size_t>(i)] -
                                 b.positions[static_cast<std::size_t>(j)];
                cost[static_cast<std::size_t>(i * k + j)] = d * d;
            }
        const ExactOtResult lp = exact_ot_small(cost, n, k, a.masses, b.masses);
        if (std::abs(fast.cost - lp.cost) > 1e-9) {
            std::ostringstream out;
            out << "trial " << trial << ": 1D cost " << fast.cost << " vs LP " << lp.cost;
            return out.str();
        }
    }
    return {};
}

std::string c2_local_linear_oracle() {
    Rng rng(102);
    for (int trial = 0; trial < 120; ++trial) {
        // random blocks with their radial profiles
        const idx na = 1 + static_cast<idx>(rng.below(8));
        const idx nb = 1 + static_cast<idx>(rng.below(8));
        BlockRadialProfile pa, pb;
        pa.radial.push_back(0.0); // representative first
        pb.radial.push_back(0.0);
        for (idx i = 1; i < na; ++i) pa.radial.push_back(rng.uniform() * 3.0);
        for (idx j = 1; j < nb; ++j) pb.radial.push_back(rng.uniform() * 3.0);
        Atoms1D ma = random_atoms(rng, na);
        Atoms1D mb = random_atoms(rng, nb);
        pa.mass = ma.masses;
        pb.mass = mb.masses;

        const SparsePlan plan = local_linear_match(pa, pb);
        double plan_cost = 0.0;
        for (const auto& e : plan.entries) {
            const double d = pa.radial[static_cast<std::size_t>(e.i)] -
                             pb.radial[static_cast<std::size_t>(e.j)];
            plan_cost += d * d * e.mass;
        }
        vec<double> cost(static_cast<std::size_t>(na * nb), 0.0);
        for (idx i = 0; i < na; ++i)
            for (idx j = 0; j < nb; ++j) {
                const double d = pa.radial[static_cast<std::size_t>(i)] -
                                 pb.radial[static_cast<std::size_t>(j)];
                cost[static_cast<std::size_t>(i * nb + j)] = d * d;
            }
        const ExactOtResult lp = exact_ot_small(cost, na, nb, pa.mass, pb.mass);
        if (std::abs(plan_cost - lp.cost) > 1e-9) {
            std::ostringstream out;
            out << "trial " << trial << ": local cost " << plan_cost << " vs LP " << lp.cost;
            return out.str();
        }
    }
    return {};
}

std::string c3_marginals() {
    Rng rng(103);
    for (int trial = 0; trial < 50; ++trial) {
        const idx n = 20 + static_cast<idx>(rng.below(181));
        const idx k = 20 + static_cast<idx>(rng.below(181));
        const MmSpace x = random_cloud(rng, n, 2);
        const MmSpace y = random_cloud(rng, k, 2);
        const PointedPartition px =
            random_voronoi(x, 2 + static_cast<int>(rng.below(8)), rng.u64());
        const PointedPartition py =
            random_voronoi(y, 2 + static_cast<int>(rng.below(8)), rng.u64());
        QgwConfig config;
        config.compute_bounds = false;
        config.compute_full_loss = false;
        auto [qc, report] = match_qgw(x, px, y, py, config);
        const DiscreteCoupling dense = densify_small(qc);
        const vec<double> rows = dense.row_marginal();
        const vec<double> cols = dense.col_marginal();
        for (idx i = 0; i < n; ++i)
            if (std::abs(rows[static_cast<std::size_t>(i)] -
                         x.measure()[static_cast<std::size_t>(i)]) > 1e-8)
                return "trial " + std::to_string(trial) + ": source marginal off";
        for (idx j = 0; j < k; ++j)
            if (std::abs(cols[static_cast<std::size_t>(j)] -
                         y.measure()[static_cast<std::size_t>(j)]) > 1e-8)
                return "trial " + std::to_string(trial) + ": target marginal off";
    }
    return {};
}

std::string c4_gw_loss_oracle() {
    // hand-derived two-point values first
    {
        const vec<double> dx{0, 1, 1, 0};
        const vec<double> dy{0, 2, 2, 0};
        DiscreteCoupling diag;
        diag.rows = diag.cols = 2;
        diag.data = {0.5, 0.0, 0.0, 0.5};
        if (std::abs(gw_loss(dx, 2, dy, 2, diag) - 0.5) > 1e-10)
            return "diagonal hand value";
        const vec<double> mu{.5, .5};
        const DiscreteCoupling prod = DiscreteCoupling::product(mu, mu);
        if (std::abs(gw_loss(dx, 2, dy, 2, prod) - 1.5) > 1e-10)
            return "product hand value";
    }
    Rng rng(104);
    for (int trial = 0; trial < 110; ++trial) {
        idx n = 2 + static_cast<idx>(rng.below(12));
        idx k = 2 + static_cast<idx>(rng.below(12));
        while (n * k > 200) {
            n = 2 + static_cast<idx>(rng.below(12));
            k = 2 + static_cast<idx>(rng.below(12));
        }
        const MmSpace x = random_cloud(rng, n, 2);
        const MmSpace y = random_cloud(rng, k, 2);
        const vec<double> dx = x.full_distance_matrix();
        const vec<double> dy = y.full_distance_matrix();
        // mix of the product coupling and a random transport vertex
        vec<double> cost(static_cast<std::size_t>(n * k));
        for (auto& v : cost) v = rng.uniform();
        const DiscreteCoupling vertex = exact_ot(cost, n, k, x.measure(), y.measure()).coupling;
        DiscreteCoupling mixed = DiscreteCoupling::product(x.measure(), y.measure());
        const double t = rng.uniform();
        for (idx c = 0; c < n * k; ++c)
            mixed.data[static_cast<std::size_t>(c)] =
                (1.0 - t) * mixed.data[static_cast<std::size_t>(c)] +
                t * vertex.data[static_cast<std::size_t>(c)];
        const double fast = gw_loss(dx, n, dy, k, mixed);
        const double brute = gw_loss_brute(dx, n, dy, k, mixed);
        if (std::abs(fast - brute) > 1e-10) {
            std::ostringstream out;
            out << "trial " << trial << ": " << fast << " vs brute " << brute;
            return out.str();
        }
    }
    return {};
}

std::string c5_projection_bound() {
    Rng rng(105);
    for (int trial = 0; trial < 50; ++trial) {
        const idx n = 10 + static_cast<idx>(rng.below(91));
        const MmSpace x = random_cloud(rng, n, 1 + static_cast<idx>(rng.below(3)));
        const PointedPartition part =
            random_voronoi(x, 2 + static_cast<int>(rng.below(7)), rng.u64());
        const DiscreteCoupling coupling = lemma1_projection_coupling(x, part);
        const QuantizedRepresentation rep = quantized_representation(x, part);
        const vec<double> dx = x.full_distance_matrix();
        const double loss = gw_loss(dx, n, rep.rep_distances, part.m(), coupling);
        const double bound = 2.0 * quantized_eccentricity(x, part);
        if (std::sqrt(loss) > bound + 1e-8) {
            std::ostringstream out;
            out << "trial " << trial << ": sqrt(loss) " << std::sqrt(loss) << " > 2q " << bound;
            return out.str();
        }
    }
    return {};
}

std::string c6_bound_chain() {
    Rng rng(106);
    for (int trial = 0; trial < 50; ++trial) {
        const idx n = 20 + static_cast<idx>(rng.below(181));
        const idx k = 20 + static_cast<idx>(rng.below(181));
        const MmSpace x = random_cloud(rng, n, 2);
        const MmSpace y = random_cloud(rng, k, 2);
        const PointedPartition px =
            random_voronoi(x, 2 + static_cast<int>(rng.below(8)), rng.u64());
        const PointedPartition py =
            random_voronoi(y, 2 + static_cast<int>(rng.below(8)), rng.u64());
        auto [qc, report] = match_qgw(x, px, y, py);
        if (!report.full_gw_loss || !report.eps_x) return "missing report fields";
        const double eps = std::max(*report.eps_x, *report.eps_y);
        const double lhs = std::sqrt(*report.full_gw_loss);
        const double rhs = std::sqrt(report.global_loss) + 8.0 * eps + 1e-8;
        if (lhs > rhs) {
            std::ostringstream out;
            out << "trial " << trial << ": " << lhs << " > " << rhs;
            return out.str();
        }
    }
    return {};
}

std::string c7_self_recovery() {
    const idx n = 2000;
    const std::uint64_t seed = 20240901;
    Rng rng(seed);
    vec<double> source = bench::make_blobs(n, Rng::derive(seed, 1));
    const MmSpace x = MmSpace::from_points(source, n, 2);
    const double diam = space_diameter(x);

    // permuted copy, each point shifted by at most 1% of the diameter
    std::vector<idx> placement(static_cast<std::size_t>(n));
    for (idx i = 0; i < n; ++i) placement[static_cast<std::size_t>(i)] = i;
    rng.shuffle(std::span<idx>(placement.data(), placement.size()));
    vec<double> target(static_cast<std::size_t>(n) * 2, 0.0);
    for (idx i = 0; i < n; ++i) {
        const double angle = rng.uniform() * 2.0 * 3.14159265358979323846;
        const double radius = rng.uniform() * 0.01 * diam;
        const idx at = placement[static_cast<std::size_t>(i)];
        target[static_cast<std::size_t>(at) * 2] =
            source[static_cast<std::size_t>(i) * 2] + radius * std::cos(angle);
        target[static_cast<std::size_t>(at) * 2 + 1] =
            source[static_cast<std::size_t>(i) * 2 + 1] + radius * std::sin(angle);
    }
    const MmSpace y = MmSpace::from_points(target, n, 2);

    PartitionConfig pc;
    pc.method = PartitionMethod::voronoi;
    pc.sample_fraction = 0.5;
    pc.seed = Rng::derive(seed, 2);
    const PointedPartition px = voronoi_partition(x, pc);
    pc.seed = Rng::derive(seed, 3);
    const PointedPartition py = voronoi_partition(y, pc);
    QgwConfig config;
    config.compute_bounds = false;
    config.compute_full_loss = false;
    auto [qc, report] = match_qgw(x, px, y, py, config);

    std::vector<idx> match(static_cast<std::size_t>(n), 0);
    for (idx i = 0; i < n; ++i) match[static_cast<std::size_t>(i)] = argmax_match(qc, i);
    const double tol = 0.05 * diam;
    idx hits = 0;
    for (idx i = 0; i < n; ++i) {
        const idx truth = placement[static_cast<std::size_t>(i)];
        const double d = y.distance(truth, match[static_cast<std::size_t>(i)]);
        if (d <= tol) ++hits;
    }
    const double hit_rate = static_cast<double>(hits) / static_cast<double>(n);
    const DistortionResult dist = distortion_score(
        y, match, std::span<const idx>(placement.data(), placement.size()));
    if (hit_rate < 0.9) {
        std::ostringstream out;
        out << "only " << 100.0 * hit_rate << "% of points within 5% of diameter";
        return out.str();
    }
    return check_le(dist.normalized, 0.01, "normalized distortion");
}

std::string c8_relative_error() {
    bench::BenchOptions options;
    options.sizes = {200, 400, 800};
    options.fracs = {0.5};
    options.trials = 5;
    options.seed = 77;
    const auto rows = bench::run_relerr_suite(options);
    for (idx n : options.sizes) {
        double total = 0.0;
        int count = 0;
        for (const auto& r : rows) {
            if (r.n != n || r.method == "gw") continue;
            if (!r.has_relative_error) return "undefined relative error at N=" + std::to_string(n);
            total += r.relative_error;
            ++count;
        }
        const double mean = total / count;
        if (mean > 1.05) {
            std::ostringstream out;
            out << "mean relative error " << mean << " > 1.05 at N=" << n;
            return out.str();
        }
    }
    return {};
}

std::string c9_scaling() {
    bench::BenchOptions options;
    options.sizes = {10000, 20000, 40000};
    options.trials = 3;
    options.seed = 99;
    const auto rows = bench::run_scaling_suite(options); // raises on any N x N array
    std::vector<double> best(options.sizes.size(), 1e300);
    for (const auto& r : rows)
        for (std::size_t s = 0; s < options.sizes.size(); ++s)
            if (r.n == options.sizes[s]) best[s] = std::min(best[s], r.seconds);
    for (std::size_t s = 1; s < best.size(); ++s) {
        const double ratio = best[s] / best[s - 1];
        if (ratio > 3.0) {
            std::ostringstream out;
            out << "t(" << options.sizes[s] << ")/t(" << options.sizes[s - 1] << ") = " << ratio;
            return out.str();
        }
    }
    return {};
}

std::string c10_fused_degeneracies() {
    Rng rng(110);
    const idx n = 24, k = 20;
    const MmSpace x = random_cloud(rng, n, 2);
    const MmSpace y = random_cloud(rng, k, 2);
    vec<double> fx(static_cast<std::size_t>(n) * 2);
    vec<double> fy(static_cast<std::size_t>(k) * 2);
    for (auto& v : fx) v = rng.uniform();
    for (auto& v : fy) v = rng.uniform();
    const PointedPartition px = random_voronoi(x, 5, 1);
    const PointedPartition py = random_voronoi(y, 4, 2);

    auto [qc_plain, r_plain] = match_qgw(x, px, y, py);
    QgwConfig config;
    auto [qc_fused, r_fused] = match_qfgw(x, px, fx, 2, y, py, fy, 2, config);
    if (qc_plain.global.size() != qc_fused.global.size()) return "support size differs at alpha=0";
    for (std::size_t s = 0; s < qc_plain.global.size(); ++s) {
        if (qc_plain.global[s].mass != qc_fused.global[s].mass) return "global mass differs";
        const auto& a = qc_plain.locals[s].entries;
        const auto& b = qc_fused.locals[s].entries;
        if (a.size() != b.size()) return "local plan sizes differ";
        for (std::size_t e = 0; e < a.size(); ++e)
            if (a[e].i != b[e].i || a[e].j != b[e].j || a[e].mass != b[e].mass)
                return "local plan entries differ";
    }

    // alpha = 1: the global step must be the pure feature transport coupling
    QgwConfig pure;
    pure.alpha = 1.0;
    auto [qc_feat, r_feat] = match_qfgw(x, px, fx, 2, y, py, fy, 2, pure);
    vec<double> rep_cost(static_cast<std::size_t>(px.m()) * static_cast<std::size_t>(py.m()), 0.0);
    for (int p = 0; p < px.m(); ++p)
        for (int q = 0; q < py.m(); ++q) {
            double s = 0.0;
            for (idx d = 0; d < 2; ++d) {
                const double diff =
                    fx[static_cast<std::size_t>(px.representative(p) * 2 + d)] -
                    fy[static_cast<std::size_t>(py.representative(q) * 2 + d)];
                s += diff * diff;
            }
            rep_cost[static_cast<std::size_t>(p * py.m() + q)] = s;
        }
    const ExactOtResult lp = exact_ot_small(rep_cost, px.m(), py.m(),
                                            px.block_measure(), py.block_measure());
    for (const auto& g : qc_feat.global) {
        const double want = lp.coupling.at(g.i, g.j);
        if (std::abs(g.mass - want) > 1e-10) {
            std::ostringstream out;
            out << "alpha=1 global mass at (" << g.i << "," << g.j << "): " << g.mass
                << " vs " << want;
            return out.str();
        }
    }
    return {};
}

std::string c11_cli_determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "qgw_acceptance_cli";
    fs::create_directories(dir);
    const idx n = 80;
    {
        vec<double> a = bench::make_blobs(n, 5);
        vec<double> b = bench::make_blobs(n, 6);
        std::ofstream sa((dir / "a.csv").string());
        std::ofstream sb((dir / "b.csv").string());
        for (idx i = 0; i < n; ++i) {
            sa << io::format_double(a[static_cast<std::size_t>(i) * 2]) << ','
               << io::format_double(a[static_cast<std::size_t>(i) * 2 + 1]) << '\n';
            sb << io::format_double(b[static_cast<std::size_t>(i) * 2]) << ','
               << io::format_double(b[static_cast<std::size_t>(i) * 2 + 1]) << '\n';
        }
    }
    auto run = [&](const std::string& tag) {
        std::ostringstream cmd;
        cmd << g_cli_path << " --seed 12 --threads 1 --log-level quiet match"
            << " --source " << (dir / "a.csv").string() << " --target "
            << (dir / "b.csv").string() << " --kind points --method voronoi --sample-frac 0.4"
            << " --dense-export"
            << " --out " << (dir / ("c" + tag + ".txt")).string() << " --report "
            << (dir / ("r" + tag + ".json")).string();
        return std::system(cmd.str().c_str());
    };
    if (run("1") != 0) return "first CLI run failed";
    if (run("2") != 0) return "second CLI run failed";

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    if (slurp(dir / "c1.txt") != slurp(dir / "c2.txt")) return "coupling files differ";
    if (slurp(dir / "c1.txt").empty()) return "coupling file is empty";
    nlohmann::json r1 = nlohmann::json::parse(slurp(dir / "r1.json"));
    nlohmann::json r2 = nlohmann::json::parse(slurp(dir / "r2.json"));
    r1.erase("timings");
    r2.erase("timings");
    if (r1.dump() != r2.dump()) return "reports differ beyond timings";
    fs::remove_all(dir);
    return {};
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<std::string()> run;
};

} // namespace

int main(int argc, char** argv) {
    for (int a = 1; a + 1 < argc; ++a)
        if (std::string(argv[a]) == "--cli") g_cli_path = argv[a + 1];

    const std::vector<Criterion> criteria{
        {1, "one-dimensional transport oracle", 5.0, c1_one_dimensional_oracle},
        {2, "local linear matching oracle", 5.0, c2_local_linear_oracle},
        {3, "expansion marginals", 30.0, c3_marginals},
        {4, "metric loss oracle", 10.0, c4_gw_loss_oracle},
        {5, "projection-coupling eccentricity bound", 30.0, c5_projection_bound},
        {6, "distortion-bound chain", 60.0, c6_bound_chain},
        {7, "self-recovery at two thousand points", 60.0, c7_self_recovery},
        {8, "relative error against the dense reference", 600.0, c8_relative_error},
        {9, "near-linear scaling without dense matrices", 600.0, c9_scaling},
        {10, "fused blend degeneracies", 10.0, c10_fused_degeneracies},
        {11, "byte-identical reruns through the CLI", 600.0, c11_cli_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = Clock::now();
        std::string err;
        try {
            err = c.run();
        } catch (const std::exception& e) {
            err = std::string("exception: ") + e.what();
        }
        const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
        if (err.empty() && elapsed > c.budget_seconds) {
            std::ostringstream out;
            out << "over time budget (" << elapsed << " s > " << c.budget_seconds << " s)";
            err = out.str();
        }
        if (err.empty()) {
            std::printf("[PASS] C%-2d %s (%.2f s)\n", c.id, c.name, elapsed);
        } else {
            std::printf("[FAIL] C%-2d %s (%.2f s): %s\n", c.id, c.name, elapsed, err.c_str());
            ++failures;
        }
        std::fflush(stdout);
    }
    if (failures == 0) std::printf("all %zu acceptance criteria passed\n", criteria.size());
    return failures == 0 ? 0 : 1;
}
