#pragma once

#include <cstdint>

#include "qgw/partition.hpp"

namespace qgw {

enum class PartitionMethod { voronoi, fluid };

struct PartitionConfig {
    PartitionMethod method = PartitionMethod::voronoi;
    /// Target block count; when 0, sample_fraction decides (m = floor(p*N)).
    int m = 0;
    double sample_fraction = 0.0;
    std::uint64_t seed = 0;
    double pagerank_damping = 0.85;
    double pagerank_tol = 1e-8;
    int fluid_max_iter = 100;
};

/// Resolves m from the config against space size n; validates ranges.
int resolve_block_count(const PartitionConfig& config, idx n);

/// Uniform iid representatives without replacement; every point joins its
/// nearest representative (ties to the lowest representative id, and each
/// representative always keeps its own block). Deterministic given
/// (space, seed). For graph spaces this runs m shortest-path sweeps.
PointedPartition voronoi_partition(const MmSpace& space, const PartitionConfig& config);

/// Fluid community detection on a connected graph, with block
/// representatives chosen by maximal PageRank. The update sweeps nodes in
/// index order; community densities are 1/|community|; a community's last
/// member never leaves it. Nodes still unassigned when fluid_max_iter is
/// reached adopt the lowest assigned neighbor community.
PointedPartition fluid_partition(const MmSpace& space, const PartitionConfig& config);

/// Power iteration on P = damping * W + (1 - damping)/N with the symmetric
/// weighted transition W, run until the L1 change drops below tol.
vec<double> pagerank(const MmSpace& space, double damping, double tol);

} // namespace qgw
