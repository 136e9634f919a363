#pragma once

#include <cstdint>
#include <span>

#include "qgw/qgw.hpp"

namespace qgw {

/// Root-mean-square distance from x to the space under its measure.
double eccentricity(const MmSpace& space, idx x);

/// Mass-weighted aggregate of within-block representative eccentricities;
/// controls how well the representatives stand in for the space.
double quantized_eccentricity(const MmSpace& space, const PointedPartition& partition);

/// The explicit coupling between a space and its representative set that
/// witnesses d_GW(X, X^m) <= 2 q(P_X): each point sends its full mass to its
/// block representative. N x m, capped at 10^6 cells.
DiscreteCoupling lemma1_projection_coupling(const MmSpace& space,
                                            const PointedPartition& partition);

struct BoundReport {
    double q_px = 0.0;
    double q_py = 0.0;
    double eps_x = 0.0;
    double eps_y = 0.0;
    /// 2 (q_px + q_py) + 8 max(eps_x, eps_y).
    double thm3_bound = 0.0;
    double lemma1_bound_x = 0.0; // 2 q_px
    double lemma1_bound_y = 0.0; // 2 q_py
};

BoundReport bound_report(const MmSpace& x, const PointedPartition& px, const MmSpace& y,
                         const PointedPartition& py);

/// Largest pairwise distance of the space (exact scan).
double space_diameter(const MmSpace& space);

struct DistortionResult {
    /// Mean squared target-space distance between each matched point and the
    /// ground-truth partner (units: squared target metric).
    double mean_squared = 0.0;
    /// The same value divided by the squared target diameter.
    double normalized = 0.0;
};

DistortionResult distortion_score(const MmSpace& target, std::span<const idx> match,
                                  std::span<const idx> ground_truth);

/// 100 x (summed target distances of the match) / (mean summed distance of
/// n_random random matchings). Random matchings are uniform permutations
/// when sizes agree, otherwise iid uniform targets.
double distortion_percentage(const MmSpace& target, std::span<const idx> match,
                             std::span<const idx> ground_truth, int n_random, std::uint64_t seed);

/// Fraction of source points whose matched target carries the same label.
double segment_transfer_score(std::span<const idx> match, std::span<const idx> labels_x,
                              std::span<const idx> labels_y);

struct RelativeErrorResult {
    double value = 0.0;
    /// Product and reference losses coincide; the ratio is meaningless.
    bool degenerate = false;
};

/// ( GW(product) - GW(quantized) ) / ( GW(product) - GW(reference) ); values
/// above one mean the quantized coupling found a lower loss than the
/// reference solve. Needs dense losses, so n_x * n_y <= 10^6.
RelativeErrorResult relative_error(const MmSpace& x, const MmSpace& y,
                                   const QuantizationCoupling& quantized,
                                   const DiscreteCoupling& reference);

/// Pushes source point colors (n_x rows of r,g,b in [0,1]) through the
/// coupling: each target color is the incoming-mass-weighted average;
/// targets with no incoming mass turn neutral gray.
vec<double> color_transfer(const QuantizationCoupling& qc, std::span<const double> source_colors);

} // namespace qgw
