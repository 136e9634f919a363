#pragma once

#include <vector>

#include "qgw/alloc.hpp"
#include "qgw/common.hpp"
#include "qgw/mm_space.hpp"

namespace qgw {

/// Disjoint blocks with one distinguished representative each. Blocks cover
/// the support of the measure; member lists start with the representative
/// followed by the remaining points in ascending order, and blocks are
/// ordered by representative id. That canonical layout is what makes runs
/// and file outputs reproducible.
class PointedPartition {
public:
    static PointedPartition from_blocks(const MmSpace& space, std::vector<vec<idx>> blocks,
                                        std::vector<idx> representatives);
    static PointedPartition identity(const MmSpace& space);

    int m() const { return static_cast<int>(blocks_.size()); }
    idx ambient_size() const { return n_; }
    const std::vector<vec<idx>>& blocks() const { return blocks_; }
    const vec<idx>& block(int p) const { return blocks_[static_cast<std::size_t>(p)]; }
    const std::vector<idx>& representatives() const { return representatives_; }
    idx representative(int p) const { return representatives_[static_cast<std::size_t>(p)]; }
    const vec<double>& block_measure() const { return block_measure_; }

    /// -1 for points outside every block (only possible with zero-mass points).
    int block_of(idx point) const { return block_of_[static_cast<std::size_t>(point)]; }
    /// Position of the point inside its block's member list.
    idx local_of(idx point) const { return local_of_[static_cast<std::size_t>(point)]; }

    void validate(const MmSpace& space) const;

private:
    idx n_ = 0;
    std::vector<vec<idx>> blocks_;
    std::vector<idx> representatives_;
    vec<double> block_measure_;
    vec<int> block_of_;
    vec<idx> local_of_;
};

/// The m representatives with the restricted metric and the block-mass
/// (pushforward) measure.
struct QuantizedRepresentation {
    idx m = 0;
    vec<double> rep_distances; // m x m, row-major
    vec<double> rep_measure;
};

/// Distances from a block's members to its representative plus the
/// normalized member masses, aligned with the block member order (entry 0
/// is the representative, so radial[0] == 0).
struct BlockRadialProfile {
    int block = 0;
    vec<double> radial;
    vec<double> mass;
};

QuantizedRepresentation quantized_representation(const MmSpace& space,
                                                 const PointedPartition& partition);

std::vector<BlockRadialProfile> block_radial_profiles(const MmSpace& space,
                                                      const PointedPartition& partition);

/// Both of the above from the same per-representative distance sweeps; for
/// graph spaces this runs exactly m shortest-path sweeps total.
struct Quantization {
    QuantizedRepresentation rep;
    std::vector<BlockRadialProfile> profiles;
};
Quantization quantize(const MmSpace& space, const PointedPartition& partition);

} // namespace qgw
