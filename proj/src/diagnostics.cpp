#include "qgw/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "qgw/kernels.hpp"
#include "qgw/rng.hpp"

namespace qgw {

double eccentricity(const MmSpace& space, idx x) {
    if (x < 0 || x >= space.size()) throw ValidationError("point index out of range");
    const vec<double> row = space.row_distances(x);
    const auto& mu = space.measure();
    double s = 0.0;
    for (idx i = 0; i < space.size(); ++i)
        s += row[static_cast<std::size_t>(i)] * row[static_cast<std::size_t>(i)] *
             mu[static_cast<std::size_t>(i)];
    return std::sqrt(s);
}

double quantized_eccentricity(const MmSpace& space, const PointedPartition& partition) {
    partition.validate(space);
    const auto& mu = space.measure();
    double total = 0.0;
    for (int p = 0; p < partition.m(); ++p) {
        const auto& members = partition.block(p);
        const vec<double> radial = space.row_distances(
            partition.representative(p), std::span<const idx>(members.data(), members.size()));
        const double block_mass = partition.block_measure()[static_cast<std::size_t>(p)];
        double s2 = 0.0;
        for (std::size_t l = 0; l < members.size(); ++l)
            s2 += radial[l] * radial[l] * mu[static_cast<std::size_t>(members[l])] / block_mass;
        total += block_mass * s2;
    }
    return std::sqrt(total);
}

DiscreteCoupling lemma1_projection_coupling(const MmSpace& space,
                                            const PointedPartition& partition) {
    const idx n = space.size();
    const idx m = partition.m();
    if (n * m > 1000000) throw ValidationError("lemma1 coupling capped at 10^6 cells");
    DiscreteCoupling c;
    c.rows = n;
    c.cols = m;
    c.data.assign(static_cast<std::size_t>(n * m), 0.0);
    const auto& mu = space.measure();
    for (idx i = 0; i < n; ++i) {
        const int p = partition.block_of(i);
        if (p >= 0) c.at(i, p) = mu[static_cast<std::size_t>(i)];
    }
    return c;
}

BoundReport bound_report(const MmSpace& x, const PointedPartition& px, const MmSpace& y,
                         const PointedPartition& py) {
    BoundReport r;
    r.q_px = quantized_eccentricity(x, px);
    r.q_py = quantized_eccentricity(y, py);
    const vec<double> dx = block_diameters(x, px);
    const vec<double> dy = block_diameters(y, py);
    r.eps_x = *std::max_element(dx.begin(), dx.end());
    r.eps_y = *std::max_element(dy.begin(), dy.end());
    r.thm3_bound = 2.0 * (r.q_px + r.q_py) + 8.0 * std::max(r.eps_x, r.eps_y);
    r.lemma1_bound_x = 2.0 * r.q_px;
    r.lemma1_bound_y = 2.0 * r.q_py;
    return r;
}

double space_diameter(const MmSpace& space) {
    const idx n = space.size();
    vec<idx> all(static_cast<std::size_t>(n), 0);
    for (idx i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    switch (space.kind()) {
    case SpaceKind::euclidean:
        return kernels::max_pairwise_distance(space.coords().data(), space.dim(),
                                              std::span<const idx>(all.data(), all.size()));
    case SpaceKind::dense:
        return kernels::max_pairwise_from_matrix(space.matrix().data(), n,
                                                 std::span<const idx>(all.data(), all.size()));
    case SpaceKind::graph: {
        if (n > space.options().dense_guard)
            throw ValidationError("graph too large for an exact diameter scan");
        double best = 0.0;
        for (idx i = 0; i < n; ++i) {
            const vec<double> row = space.row_distances(i);
            for (double v : row) best = std::max(best, v);
        }
        return best;
    }
    }
    return 0.0;
}

DistortionResult distortion_score(const MmSpace& target, std::span<const idx> match,
                                  std::span<const idx> ground_truth) {
    if (match.size() != ground_truth.size())
        throw ValidationError("match and ground truth must have equal length");
    if (match.empty()) throw ValidationError("empty match");
    const idx n = static_cast<idx>(match.size());
    double total = 0.0;
    for (idx i = 0; i < n; ++i) {
        const idx gt = ground_truth[static_cast<std::size_t>(i)];
        const idx got = match[static_cast<std::size_t>(i)];
        if (gt < 0 || gt >= target.size() || got < 0 || got >= target.size())
            throw ValidationError("match index out of target range");
        const idx targets[1] = {got};
        const double d = target.row_distances(gt, targets)[0];
        total += d * d;
    }
    DistortionResult r;
    r.mean_squared = total / static_cast<double>(n);
    const double diam = space_diameter(target);
    r.normalized = diam > 0.0 ? r.mean_squared / (diam * diam) : 0.0;
    return r;
}

double distortion_percentage(const MmSpace& target, std::span<const idx> match,
                             std::span<const idx> ground_truth, int n_random,
                             std::uint64_t seed) {
    if (match.size() != ground_truth.size())
        throw ValidationError("match and ground truth must have equal length");
    if (n_random < 1) throw ValidationError("need at least one random matching");
    const idx n = static_cast<idx>(match.size());
    const idx n_y = target.size();

    // Random baselines drawn up front so each ground-truth row is visited once.
    std::vector<std::vector<idx>> randoms(static_cast<std::size_t>(n_random));
    Rng rng(seed);
    for (auto& r : randoms) {
        r.resize(static_cast<std::size_t>(n));
        if (n == n_y) {
            for (idx i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = i;
            rng.shuffle(std::span<idx>(r.data(), r.size()));
        } else {
            for (idx i = 0; i < n; ++i)
                r[static_cast<std::size_t>(i)] =
                    static_cast<idx>(rng.below(static_cast<std::uint64_t>(n_y)));
        }
    }

    double matched_total = 0.0;
    vec<double> random_total(static_cast<std::size_t>(n_random), 0.0);
    std::vector<idx> targets(static_cast<std::size_t>(n_random) + 1);
    for (idx i = 0; i < n; ++i) {
        targets[0] = match[static_cast<std::size_t>(i)];
        for (int r = 0; r < n_random; ++r)
            targets[static_cast<std::size_t>(r) + 1] =
                randoms[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
        const vec<double> row =
            target.row_distances(ground_truth[static_cast<std::size_t>(i)],
                                 std::span<const idx>(targets.data(), targets.size()));
        matched_total += row[0];
        for (int r = 0; r < n_random; ++r)
            random_total[static_cast<std::size_t>(r)] += row[static_cast<std::size_t>(r) + 1];
    }
    double baseline = 0.0;
    for (double v : random_total) baseline += v;
    baseline /= static_cast<double>(n_random);
    if (baseline <= 0.0)
        throw NumericalError("random-matching baseline is zero (degenerate target space)");
    return 100.0 * matched_total / baseline;
}

double segment_transfer_score(std::span<const idx> match, std::span<const idx> labels_x,
                              std::span<const idx> labels_y) {
    if (match.size() != labels_x.size())
        throw ValidationError("match and source labels must have equal length");
    if (match.empty()) throw ValidationError("empty match");
    idx hits = 0;
    for (std::size_t i = 0; i < match.size(); ++i) {
        const idx j = match[i];
        if (j < 0 || j >= static_cast<idx>(labels_y.size()))
            throw ValidationError("match index outside target labels");
        if (labels_y[static_cast<std::size_t>(j)] == labels_x[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(match.size());
}

RelativeErrorResult relative_error(const MmSpace& x, const MmSpace& y,
                                   const QuantizationCoupling& quantized,
                                   const DiscreteCoupling& reference) {
    const idx n = x.size();
    const idx k = y.size();
    if (n * k > 1000000) throw ValidationError("relative error needs n_x * n_y <= 10^6");
    if (reference.rows != n || reference.cols != k)
        throw ValidationError("reference coupling shape mismatch");
    const vec<double> dx = x.full_distance_matrix();
    const vec<double> dy = y.full_distance_matrix();
    const DiscreteCoupling product = DiscreteCoupling::product(x.measure(), y.measure());
    const double loss_product = gw_loss(dx, n, dy, k, product);
    const double loss_quantized = gw_loss(dx, n, dy, k, densify_small(quantized));
    const double loss_reference = gw_loss(dx, n, dy, k, reference);

    RelativeErrorResult r;
    const double denom = loss_product - loss_reference;
    const double scale = std::max({std::abs(loss_product), std::abs(loss_reference), 1e-300});
    if (std::abs(denom) < 1e-12 * scale) {
        r.degenerate = true;
        return r;
    }
    r.value = (loss_product - loss_quantized) / denom;
    return r;
}

vec<double> color_transfer(const QuantizationCoupling& qc, std::span<const double> source_colors) {
    if (static_cast<idx>(source_colors.size()) != qc.n_x * 3)
        throw ValidationError("need an n_x by 3 color table");
    for (double v : source_colors)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("colors must lie in [0, 1]");
    vec<double> out(static_cast<std::size_t>(qc.n_y) * 3, 0.0);
    vec<double> mass(static_cast<std::size_t>(qc.n_y), 0.0);
    const auto& px = *qc.source_partition;
    const auto& py = *qc.target_partition;
    for (std::size_t s = 0; s < qc.global.size(); ++s) {
        const auto& g = qc.global[s];
        const auto& ux = px.block(static_cast<int>(g.i));
        const auto& vy = py.block(static_cast<int>(g.j));
        for (const auto& e : qc.locals[s].entries) {
            const idx gi = ux[static_cast<std::size_t>(e.i)];
            const idx gj = vy[static_cast<std::size_t>(e.j)];
            const double w = g.mass * e.mass;
            mass[static_cast<std::size_t>(gj)] += w;
            for (int c = 0; c < 3; ++c)
                out[static_cast<std::size_t>(gj) * 3 + c] +=
                    w * source_colors[static_cast<std::size_t>(gi) * 3 + c];
        }
    }
    for (idx j = 0; j < qc.n_y; ++j) {
        if (mass[static_cast<std::size_t>(j)] > 0.0) {
            for (int c = 0; c < 3; ++c) {
                double& v = out[static_cast<std::size_t>(j) * 3 + c];
                v = std::clamp(v / mass[static_cast<std::size_t>(j)], 0.0, 1.0);
            }
        } else {
            for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(j) * 3 + c] = 0.5;
        }
    }
    return out;
}

} // namespace qgw
