#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qgw/gw.hpp"
#include "qgw/partition.hpp"

namespace qgw {

struct QgwConfig {
    GwConfig gw;
    /// Global metric/feature blend (fused matching only).
    double alpha = 0.0;
    /// Local metric/feature blend (fused matching only).
    double beta = 0.0;
    /// Global-coupling entries at or below this are treated as zero; the
    /// remaining mass is renormalized to 1.
    double support_threshold = 1e-12;
    /// Exact feature transport for blocks up to this size; larger blocks
    /// fall back to 1D transport on the feature-norm profile.
    int local_feature_exact_cap = 256;
    /// Diameters, eccentricities and the distortion bound in the report.
    bool compute_bounds = true;
    /// Dense expansion loss when the sizes permit it.
    bool compute_full_loss = true;
};

/// Sparse structured coupling: a global coupling over block representatives
/// plus one local plan (in block-local indices) per supported pair.
struct QuantizationCoupling {
    idx n_x = 0;
    idx n_y = 0;
    int m_x = 0;
    int m_y = 0;
    std::vector<PlanEntry> global; // (p, q, mass), sorted by (p, q)
    std::vector<SparsePlan> locals; // aligned with `global`
    std::shared_ptr<const PointedPartition> source_partition;
    std::shared_ptr<const PointedPartition> target_partition;

    /// Sum over supported pairs of |U^p| + |V^q| - 1.
    idx support_bound() const;
    idx nnz() const;
};

struct MatchReport {
    std::string algorithm; // "qgw" or "qfgw"
    idx n_x = 0;
    idx n_y = 0;
    int m_x = 0;
    int m_y = 0;
    double alpha = 0.0;
    double beta = 0.0;
    double support_threshold = 0.0;
    std::string inner = "exact";
    double epsilon = 0.0;
    bool inner_converged = true;
    /// Loss of the (thresholded) global coupling on the representatives.
    double global_loss = 0.0;
    int global_iterations = 0;
    /// Loss of the dense expansion; absent when the instance is too large.
    std::optional<double> full_gw_loss;
    std::optional<double> q_px;
    std::optional<double> q_py;
    std::optional<double> eps_x;
    std::optional<double> eps_y;
    /// 2 (q_px + q_py) + 8 max(eps_x, eps_y).
    std::optional<double> distortion_bound;
    /// The quantized metric interpretation needs equal block counts.
    bool metric_interpretation = false;
    idx support_size = 0;
    idx coupling_nnz = 0;
    idx support_bound = 0;
    int local_feature_exact = 0;
    int local_feature_profile = 0;
    /// Block-size statistics per side: min, max, mean.
    idx min_block_x = 0, max_block_x = 0;
    idx min_block_y = 0, max_block_y = 0;
    double quantize_seconds = 0.0;
    double global_seconds = 0.0;
    double local_seconds = 0.0;
    double assemble_seconds = 0.0;
    double bounds_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Radial transport between two blocks: 1D optimal transport on distances
/// to the representatives, with plan indices in block-local terms. Because
/// both profiles put the representative first at radius zero, the stable
/// sweep always places mass on the representative pair.
SparsePlan local_linear_match(const BlockRadialProfile& profile_x,
                              const BlockRadialProfile& profile_y);

std::pair<QuantizationCoupling, MatchReport> match_qgw(const MmSpace& x,
                                                       const PointedPartition& px,
                                                       const MmSpace& y,
                                                       const PointedPartition& py,
                                                       const QgwConfig& config = {});

/// Fused variant: the global step blends representative metrics with
/// representative features (alpha), each local step blends the radial plan
/// with a feature-based plan (beta). Features are row-major n x dim tables.
std::pair<QuantizationCoupling, MatchReport> match_qfgw(
    const MmSpace& x, const PointedPartition& px, const vec<double>& features_x, idx feat_dim_x,
    const MmSpace& y, const PointedPartition& py, const vec<double>& features_y, idx feat_dim_y,
    const QgwConfig& config = {});

struct SparseRow {
    std::vector<idx> indices; // ascending target indices
    vec<double> raw;          // sums to mu_X(x)
    vec<double> normalized;   // sums to 1
    double total = 0.0;
};

/// One coupling row, touching only the global coupling and the local plans
/// of the point's block; never any full matrix.
SparseRow expand_row(const QuantizationCoupling& qc, idx x);

/// Argmax target of expand_row, ties to the lowest target index.
idx argmax_match(const QuantizationCoupling& qc, idx x);

/// Dense realization of the coupling; capped at n_x * n_y <= 10^6.
DiscreteCoupling densify_small(const QuantizationCoupling& qc);

/// Exact per-block diameters (intra-block pairwise scan). Graph spaces
/// above the dense guard refuse, as the scan needs one sweep per point.
vec<double> block_diameters(const MmSpace& space, const PointedPartition& partition);

} // namespace qgw
