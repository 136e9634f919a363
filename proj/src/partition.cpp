#include "qgw/partition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qgw {

PointedPartition PointedPartition::from_blocks(const MmSpace& space,
                                               std::vector<vec<idx>> blocks,
                                               std::vector<idx> representatives) {
    if (blocks.empty()) throw ValidationError("partition must have at least one block");
    if (blocks.size() != representatives.size())
        throw ValidationError("one representative per block required");
    const idx n = space.size();

    // Canonical member order: representative first, remaining ascending.
    for (std::size_t p = 0; p < blocks.size(); ++p) {
        auto& members = blocks[p];
        if (members.empty()) throw ValidationError("empty partition block");
        std::sort(members.begin(), members.end());
        auto it = std::find(members.begin(), members.end(), representatives[p]);
        if (it == members.end())
            throw ValidationError("representative " + std::to_string(representatives[p]) +
                                  " is not a member of its block");
        std::rotate(members.begin(), it, it + 1);
    }
    // Canonical block order: ascending representative id.
    std::vector<std::size_t> order(blocks.size());
    for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return representatives[a] < representatives[b];
    });

    PointedPartition part;
    part.n_ = n;
    part.blocks_.reserve(blocks.size());
    part.representatives_.reserve(blocks.size());
    for (std::size_t p : order) {
        part.blocks_.push_back(std::move(blocks[p]));
        part.representatives_.push_back(representatives[p]);
    }

    part.block_of_.assign(static_cast<std::size_t>(n), -1);
    part.local_of_.assign(static_cast<std::size_t>(n), 0);
    part.block_measure_.assign(part.blocks_.size(), 0.0);
    const auto& mu = space.measure();
    for (std::size_t p = 0; p < part.blocks_.size(); ++p) {
        double mass = 0.0;
        const auto& members = part.blocks_[p];
        for (std::size_t l = 0; l < members.size(); ++l) {
            const idx i = members[l];
            if (i < 0 || i >= n) throw ValidationError("block member out of range");
            if (part.block_of_[static_cast<std::size_t>(i)] != -1)
                throw ValidationError("point " + std::to_string(i) + " appears in two blocks");
            part.block_of_[static_cast<std::size_t>(i)] = static_cast<int>(p);
            part.local_of_[static_cast<std::size_t>(i)] = static_cast<idx>(l);
            mass += mu[static_cast<std::size_t>(i)];
        }
        if (mass <= 0.0)
            throw ValidationError("block " + std::to_string(p) + " has zero total mass");
        part.block_measure_[p] = mass;
    }
    for (idx i = 0; i < n; ++i) {
        if (part.block_of_[static_cast<std::size_t>(i)] == -1 &&
            mu[static_cast<std::size_t>(i)] > 0.0)
            throw ValidationError("positive-mass point " + std::to_string(i) +
                                  " is not covered by any block");
    }
    return part;
}

PointedPartition PointedPartition::identity(const MmSpace& space) {
    std::vector<vec<idx>> blocks;
    std::vector<idx> reps;
    const auto& mu = space.measure();
    for (idx i = 0; i < space.size(); ++i) {
        if (mu[static_cast<std::size_t>(i)] <= 0.0) continue;
        blocks.push_back(vec<idx>{i});
        reps.push_back(i);
    }
    return from_blocks(space, std::move(blocks), std::move(reps));
}

void PointedPartition::validate(const MmSpace& space) const {
    if (n_ != space.size()) throw ValidationError("partition built for a different space size");
    const auto& mu = space.measure();
    vec<char> seen(static_cast<std::size_t>(n_), 0);
    for (std::size_t p = 0; p < blocks_.size(); ++p) {
        const auto& members = blocks_[p];
        if (members.empty()) throw ValidationError("empty block");
        if (members[0] != representatives_[p])
            throw ValidationError("block member order lost its representative");
        double mass = 0.0;
        for (idx i : members) {
            if (seen[static_cast<std::size_t>(i)]) throw ValidationError("blocks overlap");
            seen[static_cast<std::size_t>(i)] = 1;
            mass += mu[static_cast<std::size_t>(i)];
        }
        if (std::abs(mass - block_measure_[p]) > 1e-12)
            throw ValidationError("stored block mass drifted from the pushforward");
        if (block_measure_[p] <= 0.0) throw ValidationError("block with nonpositive mass");
    }
    for (idx i = 0; i < n_; ++i)
        if (!seen[static_cast<std::size_t>(i)] && mu[static_cast<std::size_t>(i)] > 0.0)
            throw ValidationError("support not covered by blocks");
}

namespace {

// Gathers the representative-to-representative matrix and, optionally, the
// per-block radial profiles from the same distance rows.
Quantization quantize_impl(const MmSpace& space, const PointedPartition& partition,
                           bool want_profiles) {
    const int m = partition.m();
    Quantization q;
    q.rep.m = m;
    q.rep.rep_measure = partition.block_measure();
    q.rep.rep_distances.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0.0);

    const auto& reps = partition.representatives();
    if (space.kind() == SpaceKind::graph) {
        // One shortest-path sweep per representative serves both outputs.
        vec<double> rows = space.batch_row_distances(reps);
        const idx n = space.size();
        for (int p = 0; p < m; ++p) {
            const double* row = rows.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(n);
            for (int r = 0; r < m; ++r)
                q.rep.rep_distances[static_cast<std::size_t>(p) * m + r] =
                    row[reps[static_cast<std::size_t>(r)]];
            if (want_profiles) {
                const auto& members = partition.block(p);
                BlockRadialProfile prof;
                prof.block = p;
                prof.radial.reserve(members.size());
                for (idx i : members) prof.radial.push_back(row[i]);
                q.profiles.push_back(std::move(prof));
            }
        }
    } else {
        for (int p = 0; p < m; ++p) {
            for (int r = p + 1; r < m; ++r) {
                const double d =
                    space.distance(reps[static_cast<std::size_t>(p)], reps[static_cast<std::size_t>(r)]);
                q.rep.rep_distances[static_cast<std::size_t>(p) * m + r] = d;
                q.rep.rep_distances[static_cast<std::size_t>(r) * m + p] = d;
            }
            if (want_profiles) {
                const auto& members = partition.block(p);
                BlockRadialProfile prof;
                prof.block = p;
                prof.radial = space.row_distances(reps[static_cast<std::size_t>(p)],
                                                  std::span<const idx>(members.data(), members.size()));
                q.profiles.push_back(std::move(prof));
            }
        }
    }

    if (want_profiles) {
        const auto& mu = space.measure();
        for (int p = 0; p < m; ++p) {
            auto& prof = q.profiles[static_cast<std::size_t>(p)];
            const auto& members = partition.block(p);
            const double block_mass = partition.block_measure()[static_cast<std::size_t>(p)];
            prof.mass.reserve(members.size());
            for (idx i : members) prof.mass.push_back(mu[static_cast<std::size_t>(i)] / block_mass);
        }
    }
    return q;
}

} // namespace

QuantizedRepresentation quantized_representation(const MmSpace& space,
                                                 const PointedPartition& partition) {
    return quantize_impl(space, partition, false).rep;
}

std::vector<BlockRadialProfile> block_radial_profiles(const MmSpace& space,
                                                      const PointedPartition& partition) {
    return std::move(quantize_impl(space, partition, true).profiles);
}

Quantization quantize(const MmSpace& space, const PointedPartition& partition) {
    return quantize_impl(space, partition, true);
}

} // namespace qgw
