// Command-line surface: partition, match, eval, bench.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qgw/bench.hpp"
#include "qgw/diagnostics.hpp"
#include "qgw/io.hpp"
#include "qgw/parallel.hpp"
#include "qgw/partitioning.hpp"
#include "qgw/qgw.hpp"
#include "qgw/rng.hpp"

namespace {

using namespace qgw;

struct GlobalFlags {
    std::uint64_t seed = 0;
    int threads = 0;
    std::string log_level = "info";
};

void log_info(const GlobalFlags& g, const std::string& msg) {
    if (g.log_level != "quiet") std::cerr << "[qgw] " << msg << "\n";
}

struct SpaceFlags {
    std::string kind = "points";
    idx n_nodes = 0;
    bool allow_zero_mass = false;
    double inf_replace = -1.0;
};

struct LoadedSpace {
    MmSpace space;
    vec<double> features;
    idx feat_dim = 0;
    std::vector<std::string> labels;
};

LoadedSpace load_space(const std::string& path, const SpaceFlags& flags) {
    SpaceOptions opts;
    opts.allow_zero_mass = flags.allow_zero_mass;
    opts.inf_replace = flags.inf_replace;
    if (flags.kind == "points") {
        io::PointCloudData data = io::read_point_csv(path);
        LoadedSpace out{MmSpace::from_points(std::move(data.coords), data.n, data.dim,
                                             data.weights, opts),
                        std::move(data.features), data.feat_dim, std::move(data.labels)};
        return out;
    }
    if (flags.kind == "graph") {
        io::GraphData data = io::read_edge_list(path, flags.n_nodes);
        return LoadedSpace{MmSpace::from_graph(data.edges, data.n, {}, opts), {}, 0, {}};
    }
    throw ValidationError("unknown space kind '" + flags.kind + "'");
}

PartitionConfig make_partition_config(const std::string& method, int m, double frac,
                                      std::uint64_t seed, double damping, double pr_tol,
                                      int fluid_max_iter) {
    PartitionConfig pc;
    if (method == "voronoi")
        pc.method = PartitionMethod::voronoi;
    else if (method == "fluid")
        pc.method = PartitionMethod::fluid;
    else
        throw ValidationError("unknown partition method '" + method + "'");
    pc.m = m;
    pc.sample_fraction = frac;
    pc.seed = seed;
    pc.pagerank_damping = damping;
    pc.pagerank_tol = pr_tol;
    pc.fluid_max_iter = fluid_max_iter;
    return pc;
}

PointedPartition run_partition(const MmSpace& space, const PartitionConfig& pc) {
    return pc.method == PartitionMethod::voronoi ? voronoi_partition(space, pc)
                                                 : fluid_partition(space, pc);
}

vec<double> read_feature_table(const std::string& path, idx expected_n, idx& dim_out) {
    io::PointCloudData data = io::read_point_csv(path);
    if (data.n != expected_n)
        throw ValidationError(path + ": feature table has " + std::to_string(data.n) +
                              " rows, space has " + std::to_string(expected_n));
    // A feature table is a plain numeric CSV; all columns count.
    if (data.feat_dim > 0 && data.dim == 0) {
        dim_out = data.feat_dim;
        return data.features;
    }
    dim_out = data.dim + data.feat_dim;
    vec<double> merged;
    merged.reserve(static_cast<std::size_t>(expected_n * dim_out));
    for (idx i = 0; i < expected_n; ++i) {
        for (idx d = 0; d < data.dim; ++d)
            merged.push_back(data.coords[static_cast<std::size_t>(i * data.dim + d)]);
        for (idx d = 0; d < data.feat_dim; ++d)
            merged.push_back(data.features[static_cast<std::size_t>(i * data.feat_dim + d)]);
    }
    return merged;
}

std::vector<idx> map_labels(const std::vector<std::string>& a, const std::vector<std::string>& b,
                            std::vector<idx>& out_a, std::vector<idx>& out_b) {
    std::map<std::string, idx> ids;
    auto intern = [&](const std::string& s) {
        auto [it, inserted] = ids.emplace(s, static_cast<idx>(ids.size()));
        return it->second;
    };
    out_a.clear();
    out_b.clear();
    for (const auto& s : a) out_a.push_back(intern(s));
    for (const auto& s : b) out_b.push_back(intern(s));
    return {};
}

std::vector<std::string> read_token_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::string> out;
    std::string token;
    while (in >> token) out.push_back(token);
    if (out.empty()) throw IoError(path + ": empty label file");
    return out;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

// ---------------------------------------------------------------------- match

struct MatchFlags {
    std::string source;
    std::string target;
    SpaceFlags space;
    idx n_target = 0;
    std::string source_partition;
    std::string target_partition;
    std::string method = "voronoi";
    int m = 0;
    double sample_frac = 0.0;
    double damping = 0.85;
    double pagerank_tol = 1e-8;
    int fluid_max_iter = 100;
    double alpha = 0.0;
    double beta = 0.0;
    bool use_features = false;
    std::string source_features;
    std::string target_features;
    std::string inner = "exact";
    double epsilon = 0.0;
    double support_threshold = 1e-12;
    bool dense_export = false;
    bool no_bounds = false;
    bool strict = false;
    std::string out;
    std::string report_path;
    std::string out_source_partition;
    std::string out_target_partition;
};

int cmd_match(const GlobalFlags& g, const MatchFlags& f) {
    if (f.alpha != 0.0 && !f.use_features) throw ValidationError("alpha requires features");
    if (f.beta != 0.0 && !f.use_features) throw ValidationError("beta requires features");
    if (!(f.alpha >= 0.0 && f.alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
    if (!(f.beta >= 0.0 && f.beta <= 1.0)) throw ValidationError("beta must lie in [0, 1]");

    LoadedSpace sx = load_space(f.source, f.space);
    SpaceFlags target_flags = f.space;
    target_flags.n_nodes = f.n_target > 0 ? f.n_target : f.space.n_nodes;
    LoadedSpace sy = load_space(f.target, target_flags);
    log_info(g, "loaded " + std::to_string(sx.space.size()) + " source and " +
                    std::to_string(sy.space.size()) + " target points");

    // Both sides draw from the same derived seed: matching a space to itself
    // then uses identical partitions, and the matcher recovers the identity.
    const std::uint64_t partition_seed = Rng::derive(g.seed, 1);
    PointedPartition px = [&] {
        if (!f.source_partition.empty()) return io::read_partition(f.source_partition, sx.space);
        return run_partition(sx.space,
                             make_partition_config(f.method, f.m, f.sample_frac, partition_seed,
                                                   f.damping, f.pagerank_tol, f.fluid_max_iter));
    }();
    PointedPartition py = [&] {
        if (!f.target_partition.empty()) return io::read_partition(f.target_partition, sy.space);
        return run_partition(sy.space,
                             make_partition_config(f.method, f.m, f.sample_frac, partition_seed,
                                                   f.damping, f.pagerank_tol, f.fluid_max_iter));
    }();
    log_info(g, "partitions: " + std::to_string(px.m()) + " x " + std::to_string(py.m()) +
                    " blocks");

    QgwConfig config;
    config.alpha = f.alpha;
    config.beta = f.beta;
    config.support_threshold = f.support_threshold;
    config.compute_bounds = !f.no_bounds;
    config.gw.inner = f.inner == "entropic" ? GwConfig::Inner::entropic : GwConfig::Inner::exact;
    if (f.inner != "exact" && f.inner != "entropic")
        throw ValidationError("unknown inner solver '" + f.inner + "'");
    config.gw.epsilon = f.epsilon;
    config.gw.strict = f.strict;

    QuantizationCoupling qc;
    MatchReport report;
    if (f.use_features) {
        vec<double> fx = sx.features;
        idx dx = sx.feat_dim;
        vec<double> fy = sy.features;
        idx dy = sy.feat_dim;
        if (!f.source_features.empty()) fx = read_feature_table(f.source_features, sx.space.size(), dx);
        if (!f.target_features.empty()) fy = read_feature_table(f.target_features, sy.space.size(), dy);
        if (dx == 0 || dy == 0)
            throw ValidationError("features requested but none found (no f columns or feature files)");
        std::tie(qc, report) =
            match_qfgw(sx.space, px, fx, dx, sy.space, py, fy, dy, config);
    } else {
        std::tie(qc, report) = match_qgw(sx.space, px, sy.space, py, config);
    }

    io::write_coupling(f.out, qc, f.dense_export);
    if (!f.report_path.empty())
        write_text(f.report_path, io::report_json(report, g.seed, parallel::threads()));
    if (!f.out_source_partition.empty()) io::write_partition(f.out_source_partition, px);
    if (!f.out_target_partition.empty()) io::write_partition(f.out_target_partition, py);
    log_info(g, "matched: global loss " + io::format_double(report.global_loss) + ", " +
                    std::to_string(report.support_size) + " supported block pairs");
    if (!report.inner_converged)
        log_info(g, "warning: entropic inner steps did not fully converge");
    return 0;
}

// ----------------------------------------------------------------- partition

struct PartitionFlags {
    std::string input;
    SpaceFlags space;
    std::string method = "voronoi";
    int m = 0;
    double sample_frac = 0.0;
    double damping = 0.85;
    double pagerank_tol = 1e-8;
    int fluid_max_iter = 100;
    std::string out;
};

int cmd_partition(const GlobalFlags& g, const PartitionFlags& f) {
    LoadedSpace s = load_space(f.input, f.space);
    const PointedPartition part = run_partition(
        s.space, make_partition_config(f.method, f.m, f.sample_frac, g.seed, f.damping,
                                       f.pagerank_tol, f.fluid_max_iter));
    io::write_partition(f.out, part);
    log_info(g, "wrote " + std::to_string(part.m()) + " blocks to " + f.out);
    return 0;
}

// ---------------------------------------------------------------------- eval

struct EvalFlags {
    std::string coupling;
    std::string source;
    std::string target;
    SpaceFlags space;
    idx n_target = 0;
    std::string source_partition;
    std::string target_partition;
    std::string metric = "distortion";
    std::string ground_truth;
    std::string labels_source;
    std::string labels_target;
    std::string colors;
    std::string out;
    std::string report_path;
    int n_random = 5;
};

int cmd_eval(const GlobalFlags& g, const EvalFlags& f) {
    LoadedSpace sx = load_space(f.source, f.space);
    SpaceFlags target_flags = f.space;
    target_flags.n_nodes = f.n_target > 0 ? f.n_target : f.space.n_nodes;
    LoadedSpace sy = load_space(f.target, target_flags);
    auto px = std::make_shared<PointedPartition>(io::read_partition(f.source_partition, sx.space));
    auto py = std::make_shared<PointedPartition>(io::read_partition(f.target_partition, sy.space));
    QuantizationCoupling qc = io::attach_partitions(io::read_coupling(f.coupling), px, py);

    std::vector<idx> match(static_cast<std::size_t>(qc.n_x), 0);
    for (idx i = 0; i < qc.n_x; ++i) match[static_cast<std::size_t>(i)] = argmax_match(qc, i);

    nlohmann::json j;
    j["schema_version"] = 1;
    if (f.metric == "distortion" || f.metric == "distortion-pct") {
        if (f.ground_truth.empty()) throw ValidationError("metric needs --ground-truth");
        const std::vector<idx> gt = io::read_index_file(f.ground_truth);
        if (static_cast<idx>(gt.size()) != qc.n_x)
            throw ValidationError("ground truth length does not match the source size");
        if (f.metric == "distortion") {
            const DistortionResult r = distortion_score(sy.space, match, gt);
            j["metric"] = "distortion";
            j["mean_squared"] = r.mean_squared;
            j["normalized_by_diameter_sq"] = r.normalized;
        } else {
            const double pct = distortion_percentage(sy.space, match, gt, f.n_random, g.seed);
            j["metric"] = "distortion_percentage";
            j["value"] = pct;
            j["n_random"] = f.n_random;
        }
    } else if (f.metric == "segment") {
        std::vector<std::string> raw_x = f.labels_source.empty()
                                             ? sx.labels
                                             : read_token_file(f.labels_source);
        std::vector<std::string> raw_y = f.labels_target.empty()
                                             ? sy.labels
                                             : read_token_file(f.labels_target);
        if (raw_x.empty() || raw_y.empty())
            throw ValidationError("segment metric needs labels (label column or label files)");
        std::vector<idx> lx, ly;
        map_labels(raw_x, raw_y, lx, ly);
        j["metric"] = "segment_transfer";
        j["value"] = segment_transfer_score(match, lx, ly);
    } else if (f.metric == "colors") {
        if (f.colors.empty() || f.out.empty())
            throw ValidationError("color transfer needs --colors and --out");
        const vec<double> colors = io::read_color_csv(f.colors, qc.n_x);
        io::write_color_csv(f.out, color_transfer(qc, colors));
        j["metric"] = "color_transfer";
        j["out"] = f.out;
        j["n_colored"] = qc.n_y;
    } else {
        throw ValidationError("unknown metric '" + f.metric + "'");
    }

    const std::string text = j.dump(2) + "\n";
    if (!f.report_path.empty())
        write_text(f.report_path, text);
    else
        std::cout << text;
    return 0;
}

// ---------------------------------------------------------------------- bench

struct BenchFlags {
    std::string suite = "relerr";
    std::vector<idx> sizes;
    std::vector<double> fracs{0.5};
    int trials = 1;
    std::string out;
};

int cmd_bench(const GlobalFlags& g, const BenchFlags& f) {
    bench::BenchOptions options;
    options.sizes = f.sizes;
    options.fracs = f.fracs;
    options.trials = f.trials;
    options.seed = g.seed;
    std::vector<bench::BenchRow> rows;
    if (f.suite == "relerr")
        rows = bench::run_relerr_suite(options);
    else if (f.suite == "scaling")
        rows = bench::run_scaling_suite(options);
    else
        throw ValidationError("unknown suite '" + f.suite + "'");
    const std::string csv = bench::to_csv(rows);
    if (!f.out.empty())
        write_text(f.out, csv);
    else
        std::cout << csv;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantized matching of metric measure spaces"};
    app.require_subcommand(1);

    GlobalFlags g;
    app.add_option("--seed", g.seed, "global RNG seed");
    app.add_option("--threads", g.threads, "worker count (0 = hardware)");
    app.add_option("--log-level", g.log_level, "quiet|info")
        ->check(CLI::IsMember({"quiet", "info"}));

    PartitionFlags pf;
    auto* partition = app.add_subcommand("partition", "build a pointed partition of a space");
    partition->add_option("--input", pf.input, "point CSV or edge list")->required();
    partition->add_option("--kind", pf.space.kind, "points|graph")
        ->check(CLI::IsMember({"points", "graph"}));
    partition->add_option("--n", pf.space.n_nodes, "graph node count (default: max id + 1)");
    partition->add_option("--method", pf.method, "voronoi|fluid");
    partition->add_option("--m", pf.m, "block count");
    partition->add_option("--sample-frac", pf.sample_frac, "block count as a fraction of N");
    partition->add_option("--damping", pf.damping, "PageRank damping");
    partition->add_option("--pagerank-tol", pf.pagerank_tol, "PageRank L1 tolerance");
    partition->add_option("--fluid-max-iter", pf.fluid_max_iter, "fluid sweep cap");
    partition->add_flag("--allow-zero-mass", pf.space.allow_zero_mass,
                        "keep zero-mass points in the space (outside all blocks)");
    partition->add_option("--inf-replace", pf.space.inf_replace,
                          "replace unreachable geodesics by this factor times the row max");
    partition->add_option("--out", pf.out, "partition file")->required();

    MatchFlags mf;
    auto* match = app.add_subcommand("match", "match two spaces with a quantization coupling");
    match->add_option("--source", mf.source)->required();
    match->add_option("--target", mf.target)->required();
    match->add_option("--kind", mf.space.kind, "points|graph")
        ->check(CLI::IsMember({"points", "graph"}));
    match->add_option("--n-source", mf.space.n_nodes, "source graph node count");
    match->add_option("--n-target", mf.n_target, "target graph node count");
    match->add_option("--source-partition", mf.source_partition, "partition file (skips inline)");
    match->add_option("--target-partition", mf.target_partition, "partition file (skips inline)");
    match->add_option("--method", mf.method, "inline partition method: voronoi|fluid");
    match->add_option("--m", mf.m, "inline partition block count");
    match->add_option("--sample-frac", mf.sample_frac, "inline partition fraction");
    match->add_option("--damping", mf.damping, "PageRank damping");
    match->add_option("--pagerank-tol", mf.pagerank_tol, "PageRank L1 tolerance");
    match->add_option("--fluid-max-iter", mf.fluid_max_iter, "fluid sweep cap");
    match->add_option("--alpha", mf.alpha, "global metric/feature blend");
    match->add_option("--beta", mf.beta, "local metric/feature blend");
    match->add_flag("--features", mf.use_features, "fused matching with point features");
    match->add_option("--source-features", mf.source_features, "feature CSV for the source");
    match->add_option("--target-features", mf.target_features, "feature CSV for the target");
    match->add_option("--inner", mf.inner, "exact|entropic");
    match->add_option("--epsilon", mf.epsilon, "entropic weight (0 = 1e-2 x median cost)");
    match->add_option("--support-threshold", mf.support_threshold, "global support cutoff");
    match->add_flag("--dense-export", mf.dense_export, "append dense triplets to the coupling");
    match->add_flag("--no-bounds", mf.no_bounds, "skip diameters and the distortion bound");
    match->add_flag("--strict", mf.strict, "treat inner non-convergence as an error");
    match->add_flag("--allow-zero-mass", mf.space.allow_zero_mass,
                    "keep zero-mass points in the space (outside all blocks)");
    match->add_option("--inf-replace", mf.space.inf_replace,
                      "replace unreachable geodesics by this factor times the row max");
    match->add_option("--out", mf.out, "coupling file")->required();
    match->add_option("--report", mf.report_path, "JSON report path");
    match->add_option("--out-source-partition", mf.out_source_partition,
                      "write the source partition actually used");
    match->add_option("--out-target-partition", mf.out_target_partition,
                      "write the target partition actually used");

    EvalFlags ef;
    auto* eval = app.add_subcommand("eval", "evaluate a coupling file");
    eval->add_option("--coupling", ef.coupling)->required();
    eval->add_option("--source", ef.source)->required();
    eval->add_option("--target", ef.target)->required();
    eval->add_option("--kind", ef.space.kind, "points|graph")
        ->check(CLI::IsMember({"points", "graph"}));
    eval->add_option("--n-source", ef.space.n_nodes, "source graph node count");
    eval->add_option("--n-target", ef.n_target, "target graph node count");
    eval->add_option("--source-partition", ef.source_partition)->required();
    eval->add_option("--target-partition", ef.target_partition)->required();
    eval->add_option("--metric", ef.metric, "distortion|distortion-pct|segment|colors");
    eval->add_option("--ground-truth", ef.ground_truth, "target index per source line");
    eval->add_option("--labels-source", ef.labels_source, "label per line");
    eval->add_option("--labels-target", ef.labels_target, "label per line");
    eval->add_option("--colors", ef.colors, "source colors CSV (n x 3)");
    eval->add_option("--out", ef.out, "output path for transferred colors");
    eval->add_option("--report", ef.report_path, "metrics JSON path (default: stdout)");
    eval->add_option("--n-random", ef.n_random, "random baselines for distortion-pct");
    eval->add_option("--inf-replace", ef.space.inf_replace,
                     "replace unreachable geodesics by this factor times the row max");

    BenchFlags bf;
    auto* bench_cmd = app.add_subcommand("bench", "desk-scale benchmark suites");
    bench_cmd->add_option("--suite", bf.suite, "relerr|scaling");
    bench_cmd->add_option("--sizes", bf.sizes, "point counts")->delimiter(',');
    bench_cmd->add_option("--fracs", bf.fracs, "sampling fractions")->delimiter(',');
    bench_cmd->add_option("--trials", bf.trials, "trials per size");
    bench_cmd->add_option("--out", bf.out, "CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
        parallel::set_threads(g.threads > 0 ? g.threads : parallel::hardware_threads());
        if (partition->parsed()) return cmd_partition(g, pf);
        if (match->parsed()) return cmd_match(g, mf);
        if (eval->parsed()) return cmd_eval(g, ef);
        if (bench_cmd->parsed()) return cmd_bench(g, bf);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
