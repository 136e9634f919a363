#include "qgw/partitioning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qgw/parallel.hpp"
#include "qgw/rng.hpp"

namespace qgw {

namespace {

vec<idx> support_indices(const MmSpace& space) {
    vec<idx> support;
    const auto& mu = space.measure();
    for (idx i = 0; i < space.size(); ++i)
        if (mu[static_cast<std::size_t>(i)] > 0.0) support.push_back(i);
    return support;
}

void require_connected(const MmSpace& space) {
    const idx n = space.size();
    vec<char> seen(static_cast<std::size_t>(n), 0);
    vec<idx> stack{0};
    seen[0] = 1;
    idx reached = 1;
    while (!stack.empty()) {
        const idx u = stack.back();
        stack.pop_back();
        const auto& off = space.adj_offsets();
        for (idx e = off[static_cast<std::size_t>(u)]; e < off[static_cast<std::size_t>(u) + 1];
             ++e) {
            const idx v = space.adj_targets()[static_cast<std::size_t>(e)];
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++reached;
                stack.push_back(v);
            }
        }
    }
    if (reached != n) throw ValidationError("disconnected graph");
}

} // namespace

int resolve_block_count(const PartitionConfig& config, idx n) {
    idx m = config.m;
    if (m == 0) {
        if (!(config.sample_fraction > 0.0 && config.sample_fraction <= 1.0))
            throw ValidationError("sample fraction must be in (0, 1]");
        m = static_cast<idx>(std::floor(config.sample_fraction * static_cast<double>(n)));
        if (m < 1) m = 1;
    }
    if (m < 1 || m > n)
        throw ValidationError("block count " + std::to_string(m) + " out of range [1, " +
                              std::to_string(n) + "]");
    return static_cast<int>(m);
}

PointedPartition voronoi_partition(const MmSpace& space, const PartitionConfig& config) {
    if (config.method != PartitionMethod::voronoi)
        throw ValidationError("config method is not voronoi");
    vec<idx> support = support_indices(space);
    const idx n_support = static_cast<idx>(support.size());
    const int m = resolve_block_count(config, space.size());
    if (m > n_support)
        throw ValidationError("block count exceeds the number of positive-mass points");

    Rng rng(config.seed);
    std::vector<idx> drawn = rng.sample_without_replacement(n_support, m);
    std::vector<idx> reps(drawn.size());
    for (std::size_t k = 0; k < drawn.size(); ++k)
        reps[k] = support[static_cast<std::size_t>(drawn[k])];
    std::sort(reps.begin(), reps.end());

    const idx n = space.size();
    vec<int> assign(static_cast<std::size_t>(n), -1);
    for (std::size_t p = 0; p < reps.size(); ++p)
        assign[static_cast<std::size_t>(reps[p])] = static_cast<int>(p);

    if (space.kind() == SpaceKind::graph) {
        vec<double> rows =
            space.batch_row_distances(std::span<const idx>(reps.data(), reps.size()));
        const auto& mu = space.measure();
        for (idx i = 0; i < n; ++i) {
            if (assign[static_cast<std::size_t>(i)] != -1) continue; // representative
            if (mu[static_cast<std::size_t>(i)] <= 0.0) continue;    // dropped
            int best = 0;
            double best_d = rows[static_cast<std::size_t>(i)];
            for (int p = 1; p < m; ++p) {
                const double d = rows[static_cast<std::size_t>(p) * static_cast<std::size_t>(n) +
                                      static_cast<std::size_t>(i)];
                if (d < best_d) {
                    best_d = d;
                    best = p;
                }
            }
            assign[static_cast<std::size_t>(i)] = best;
        }
    } else {
        const auto& mu = space.measure();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) \
    if (parallel::threads() > 1 && n > 2048)
#endif
        for (idx i = 0; i < n; ++i) {
            if (assign[static_cast<std::size_t>(i)] != -1) continue;
            if (mu[static_cast<std::size_t>(i)] <= 0.0) continue;
            int best = 0;
            double best_d = space.distance(i, reps[0]);
            for (int p = 1; p < m; ++p) {
                const double d = space.distance(i, reps[static_cast<std::size_t>(p)]);
                if (d < best_d) {
                    best_d = d;
                    best = p;
                }
            }
            assign[static_cast<std::size_t>(i)] = best;
        }
    }

    std::vector<vec<idx>> blocks(static_cast<std::size_t>(m));
    for (idx i = 0; i < n; ++i) {
        const int p = assign[static_cast<std::size_t>(i)];
        if (p >= 0) blocks[static_cast<std::size_t>(p)].push_back(i);
    }
    return PointedPartition::from_blocks(space, std::move(blocks),
                                         std::vector<idx>(reps.begin(), reps.end()));
}

vec<double> pagerank(const MmSpace& space, double damping, double tol) {
    if (space.kind() != SpaceKind::graph) throw ValidationError("pagerank requires a graph space");
    if (!(damping > 0.0 && damping < 1.0)) throw ValidationError("damping must lie in (0, 1)");
    const idx n = space.size();
    if (n == 1) return vec<double>{1.0};
    require_connected(space);

    const auto& off = space.adj_offsets();
    const auto& tgt = space.adj_targets();
    const auto& wts = space.adj_weights();
    vec<double> wdeg(static_cast<std::size_t>(n), 0.0);
    for (idx u = 0; u < n; ++u)
        for (idx e = off[static_cast<std::size_t>(u)]; e < off[static_cast<std::size_t>(u) + 1]; ++e)
            wdeg[static_cast<std::size_t>(u)] += wts[static_cast<std::size_t>(e)];

    vec<double> x(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    vec<double> next(static_cast<std::size_t>(n), 0.0);
    const double teleport = (1.0 - damping) / static_cast<double>(n);
    const int max_iter = 100000;
    for (int it = 0; it < max_iter; ++it) {
        std::fill(next.begin(), next.end(), teleport);
        for (idx u = 0; u < n; ++u) {
            const double xu = x[static_cast<std::size_t>(u)];
            if (wdeg[static_cast<std::size_t>(u)] > 0.0) {
                const double share = damping * xu / wdeg[static_cast<std::size_t>(u)];
                for (idx e = off[static_cast<std::size_t>(u)];
                     e < off[static_cast<std::size_t>(u) + 1]; ++e)
                    next[static_cast<std::size_t>(tgt[static_cast<std::size_t>(e)])] +=
                        share * wts[static_cast<std::size_t>(e)];
            } else {
                // Dangling under zero weighted degree: spread uniformly.
                const double share = damping * xu / static_cast<double>(n);
                for (idx v = 0; v < n; ++v) next[static_cast<std::size_t>(v)] += share;
            }
        }
        double diff = 0.0;
        for (idx v = 0; v < n; ++v)
            diff += std::abs(next[static_cast<std::size_t>(v)] - x[static_cast<std::size_t>(v)]);
        std::swap(x, next);
        if (diff < tol) break;
    }
    double total = 0.0;
    for (double v : x) total += v;
    for (double& v : x) v /= total;
    return x;
}

PointedPartition fluid_partition(const MmSpace& space, const PartitionConfig& config) {
    if (config.method != PartitionMethod::fluid)
        throw ValidationError("config method is not fluid");
    if (space.kind() != SpaceKind::graph)
        throw ValidationError("fluid partitioning requires a graph space");
    require_connected(space);

    vec<idx> support = support_indices(space);
    const int m = resolve_block_count(config, space.size());
    if (m > static_cast<idx>(support.size()))
        throw ValidationError("block count exceeds the number of positive-mass points");
    const idx n = space.size();

    Rng rng(config.seed);
    std::vector<idx> drawn = rng.sample_without_replacement(static_cast<idx>(support.size()), m);
    std::vector<idx> seeds(drawn.size());
    for (std::size_t k = 0; k < drawn.size(); ++k)
        seeds[k] = support[static_cast<std::size_t>(drawn[k])];
    std::sort(seeds.begin(), seeds.end());

    vec<int> community(static_cast<std::size_t>(n), -1);
    vec<idx> comm_size(static_cast<std::size_t>(m), 0);
    vec<double> density(static_cast<std::size_t>(m), 1.0);
    for (int k = 0; k < m; ++k) {
        community[static_cast<std::size_t>(seeds[static_cast<std::size_t>(k)])] = k;
        comm_size[static_cast<std::size_t>(k)] = 1;
    }

    const auto& off = space.adj_offsets();
    const auto& tgt = space.adj_targets();
    vec<double> counter(static_cast<std::size_t>(m), 0.0);
    vec<int> touched;
    for (int sweep = 0; sweep < config.fluid_max_iter; ++sweep) {
        bool changed = false;
        for (idx v = 0; v < n; ++v) {
            touched.clear();
            auto bump = [&](int c) {
                if (counter[static_cast<std::size_t>(c)] == 0.0) touched.push_back(c);
                counter[static_cast<std::size_t>(c)] += density[static_cast<std::size_t>(c)];
            };
            const int own = community[static_cast<std::size_t>(v)];
            if (own != -1) bump(own);
            for (idx e = off[static_cast<std::size_t>(v)];
                 e < off[static_cast<std::size_t>(v) + 1]; ++e) {
                const int c = community[static_cast<std::size_t>(tgt[static_cast<std::size_t>(e)])];
                if (c != -1) bump(c);
            }
            if (touched.empty()) continue;
            double best = 0.0;
            for (int c : touched) best = std::max(best, counter[static_cast<std::size_t>(c)]);
            int pick = -1;
            bool own_is_best = false;
            for (int c : touched) {
                if (counter[static_cast<std::size_t>(c)] == best) {
                    if (c == own) own_is_best = true;
                    if (pick == -1 || c < pick) pick = c;
                }
            }
            for (int c : touched) counter[static_cast<std::size_t>(c)] = 0.0;
            if (own_is_best || pick == own) continue;
            if (own != -1) {
                if (comm_size[static_cast<std::size_t>(own)] == 1) continue; // last member stays
                --comm_size[static_cast<std::size_t>(own)];
                density[static_cast<std::size_t>(own)] =
                    1.0 / static_cast<double>(comm_size[static_cast<std::size_t>(own)]);
            }
            community[static_cast<std::size_t>(v)] = pick;
            ++comm_size[static_cast<std::size_t>(pick)];
            density[static_cast<std::size_t>(pick)] =
                1.0 / static_cast<double>(comm_size[static_cast<std::size_t>(pick)]);
            changed = true;
        }
        if (!changed) break;
    }

    // Iteration cap can leave distant nodes unassigned; attach them to the
    // lowest assigned neighbor community until everything is covered.
    for (;;) {
        bool pending = false;
        bool progressed = false;
        for (idx v = 0; v < n; ++v) {
            if (community[static_cast<std::size_t>(v)] != -1) continue;
            int adopt = -1;
            for (idx e = off[static_cast<std::size_t>(v)];
                 e < off[static_cast<std::size_t>(v) + 1]; ++e) {
                const int c = community[static_cast<std::size_t>(tgt[static_cast<std::size_t>(e)])];
                if (c != -1 && (adopt == -1 || c < adopt)) adopt = c;
            }
            if (adopt == -1) {
                pending = true;
                continue;
            }
            community[static_cast<std::size_t>(v)] = adopt;
            ++comm_size[static_cast<std::size_t>(adopt)];
            progressed = true;
        }
        if (!pending) break;
        if (!progressed) throw ValidationError("disconnected graph");
    }

    vec<double> pr = pagerank(space, config.pagerank_damping, config.pagerank_tol);
    const auto& mu = space.measure();
    std::vector<vec<idx>> blocks(static_cast<std::size_t>(m));
    std::vector<idx> reps(static_cast<std::size_t>(m), -1);
    for (idx v = 0; v < n; ++v) {
        if (mu[static_cast<std::size_t>(v)] <= 0.0) continue;
        const int c = community[static_cast<std::size_t>(v)];
        blocks[static_cast<std::size_t>(c)].push_back(v);
        idx& rep = reps[static_cast<std::size_t>(c)];
        if (rep == -1 || pr[static_cast<std::size_t>(v)] > pr[static_cast<std::size_t>(rep)])
            rep = v;
    }
    for (std::size_t c = 0; c < blocks.size(); ++c)
        if (blocks[c].empty())
            throw ValidationError("fluid community " + std::to_string(c) +
                                  " lost all positive-mass members");
    return PointedPartition::from_blocks(space, std::move(blocks), std::move(reps));
}

} // namespace qgw
