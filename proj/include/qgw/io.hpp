#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qgw/qgw.hpp"

namespace qgw::io {

/// Parsed point-cloud CSV. Columns are coordinates unless a header names
/// them otherwise: names starting with "f" are feature dimensions, "label"
/// carries point labels, "weight" carries measure weights. Headerless files
/// are all-coordinate.
struct PointCloudData {
    vec<double> coords;
    idx n = 0;
    idx dim = 0;
    vec<double> features;
    idx feat_dim = 0;
    std::vector<std::string> labels; // empty when no label column
    vec<double> weights;             // empty when no weight column
};

PointCloudData read_point_csv(const std::string& path);

/// Whitespace edge list "u v [w]" with 0-based ids; '#' starts a comment.
/// Node count is max id + 1 unless a larger hint is given.
struct GraphData {
    std::vector<GraphEdge> edges;
    idx n = 0;
};

GraphData read_edge_list(const std::string& path, idx n_hint = 0);

/// Partition file: one "point_index block_index rep_flag" line per covered
/// point, in point order.
void write_partition(const std::string& path, const PointedPartition& partition);
PointedPartition read_partition(const std::string& path, const MmSpace& space);

/// Coupling file: header "m_X m_Y N_X N_Y"; "G p q mass" triplets for the
/// global coupling; "L p q" sections with block-local "i j mass" triplets;
/// optionally a trailing "D i j mass" dense section in global indices.
void write_coupling(const std::string& path, const QuantizationCoupling& qc,
                    bool dense_export = false);

struct RawCoupling {
    idx n_x = 0;
    idx n_y = 0;
    int m_x = 0;
    int m_y = 0;
    std::vector<PlanEntry> global;
    std::vector<SparsePlan> locals;
};

RawCoupling read_coupling(const std::string& path);

/// Reattaches partitions so the parsed structure can be expanded.
QuantizationCoupling attach_partitions(RawCoupling raw,
                                       std::shared_ptr<const PointedPartition> source,
                                       std::shared_ptr<const PointedPartition> target);

/// One integer per line (ground-truth permutations, label vectors).
std::vector<idx> read_index_file(const std::string& path);

/// n x 3 CSV of values in [0, 1].
vec<double> read_color_csv(const std::string& path, idx expected_n);
void write_color_csv(const std::string& path, const vec<double>& colors);

/// Match report as a JSON document (schema_version 1). Timings live under
/// a single "timings" key so consumers can strip them.
std::string report_json(const MatchReport& report, std::uint64_t seed, int threads);

/// Round-trip-exact decimal formatting for doubles.
std::string format_double(double v);

} // namespace qgw::io
