#pragma once

#include <span>

#include "qgw/alloc.hpp"
#include "qgw/common.hpp"

namespace qgw {

enum class SpaceKind { dense, euclidean, graph };

struct GraphEdge {
    idx u = 0;
    idx v = 0;
    double w = 1.0;
};

struct SpaceOptions {
    /// Points with zero mass are rejected unless set; when set they stay in
    /// the space but are excluded from partition blocks.
    bool allow_zero_mass = false;
    /// Unreachable geodesics are an error when negative; otherwise they are
    /// replaced by this factor times the largest finite distance in the row.
    double inf_replace = -1.0;
    /// Graph spaces larger than this refuse to materialize the full N x N
    /// matrix; per-row queries stay available at any size.
    idx dense_guard = 5000;
};

/// Finite metric measure space with a distance oracle. The payload is one of
/// a dense symmetric matrix, a Euclidean coordinate table, or a weighted
/// adjacency structure whose geodesics are computed on demand; none of the
/// access paths below materializes an N x N matrix for large graphs.
class MmSpace {
public:
    static MmSpace from_points(vec<double> coords, idx n, idx dim,
                               std::span<const double> weights = {}, SpaceOptions opts = {});
    static MmSpace from_graph(std::span<const GraphEdge> edges, idx n,
                              std::span<const double> weights = {}, SpaceOptions opts = {});
    static MmSpace from_dense(vec<double> matrix, idx n, std::span<const double> weights = {},
                              SpaceOptions opts = {});

    SpaceKind kind() const { return kind_; }
    idx size() const { return n_; }
    const vec<double>& measure() const { return measure_; }
    const SpaceOptions& options() const { return opts_; }
    bool fully_supported() const { return fully_supported_; }

    /// O(1) for dense/euclidean payloads, one shortest-path run for graphs.
    double distance(idx i, idx j) const;

    /// Distances from `source` to every point.
    vec<double> row_distances(idx source) const;

    /// Distances from `source` to the given targets only.
    vec<double> row_distances(idx source, std::span<const idx> targets) const;

    /// Stacked rows for several sources (sources.size() x N, row-major);
    /// graph sources run their shortest-path sweeps in parallel.
    vec<double> batch_row_distances(std::span<const idx> sources) const;

    /// Refused for graph spaces above the dense guard.
    vec<double> full_distance_matrix() const;

    // Euclidean payload access.
    idx dim() const { return dim_; }
    const vec<double>& coords() const { return coords_; }
    const double* point(idx i) const { return coords_.data() + i * dim_; }

    // Dense payload access.
    const vec<double>& matrix() const { return matrix_; }

    // Graph payload access (CSR over both edge directions).
    const vec<idx>& adj_offsets() const { return adj_offsets_; }
    const vec<idx>& adj_targets() const { return adj_targets_; }
    const vec<double>& adj_weights() const { return adj_weights_; }
    idx edge_count() const { return static_cast<idx>(adj_targets_.size()) / 2; }

private:
    MmSpace() = default;

    void set_measure(std::span<const double> weights, SpaceOptions opts);
    vec<double> graph_sssp(idx source) const;
    void apply_unreachable_policy(vec<double>& row, idx source) const;

    SpaceKind kind_ = SpaceKind::dense;
    idx n_ = 0;
    idx dim_ = 0;
    vec<double> measure_;
    bool fully_supported_ = true;
    SpaceOptions opts_;

    vec<double> matrix_; // dense kind
    vec<double> coords_; // euclidean kind

    vec<idx> adj_offsets_; // graph kind, CSR over both edge directions
    vec<idx> adj_targets_;
    vec<double> adj_weights_;
};

/// Distances from one block representative to a set of points; for graph
/// spaces this is a single O(|E| log N) shortest-path sweep.
vec<double> rep_row_distances(const MmSpace& space, idx rep, std::span<const idx> targets);

} // namespace qgw
