#include "qgw/mm_space.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <queue>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qgw/parallel.hpp"
#include "qgw/rng.hpp"

namespace qgw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double euclidean(const double* a, const double* b, idx dim) {
    double s = 0.0;
    for (idx d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return std::sqrt(s);
}

void validate_dense(const vec<double>& m, idx n) {
    for (idx i = 0; i < n; ++i) {
        if (m[i * n + i] != 0.0)
            throw ValidationError("dense distance matrix: nonzero diagonal at " +
                                  std::to_string(i));
        for (idx j = i + 1; j < n; ++j) {
            const double a = m[i * n + j];
            const double b = m[j * n + i];
            if (!std::isfinite(a) || a < 0.0)
                throw ValidationError("dense distance matrix: invalid entry at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");
            if (a != b)
                throw ValidationError("dense distance matrix: not symmetric at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }
    // Triangle inequality on sampled triples; a full O(N^3) check is
    // impractical. Fixed seed keeps construction deterministic.
    double scale = 0.0;
    for (double v : m) scale = std::max(scale, v);
    Rng rng(0x72616e642d747269ULL);
    const int samples = 1000;
    for (int s = 0; s < samples && n >= 3; ++s) {
        const idx i = static_cast<idx>(rng.below(static_cast<std::uint64_t>(n)));
        const idx j = static_cast<idx>(rng.below(static_cast<std::uint64_t>(n)));
        const idx k = static_cast<idx>(rng.below(static_cast<std::uint64_t>(n)));
        if (m[i * n + k] > m[i * n + j] + m[j * n + k] + 1e-9 * scale)
            throw ValidationError("dense distance matrix: triangle inequality violated on triple (" +
                                  std::to_string(i) + "," + std::to_string(j) + "," +
                                  std::to_string(k) + ")");
    }
}

} // namespace

void MmSpace::set_measure(std::span<const double> weights, SpaceOptions opts) {
    opts_ = opts;
    measure_.assign(static_cast<std::size_t>(n_), 0.0);
    if (weights.empty()) {
        const double u = 1.0 / static_cast<double>(n_);
        for (auto& v : measure_) v = u;
        return;
    }
    if (static_cast<idx>(weights.size()) != n_)
        throw ValidationError("weights length does not match point count");
    double total = 0.0;
    for (idx i = 0; i < n_; ++i) {
        const double w = weights[static_cast<std::size_t>(i)];
        if (!std::isfinite(w) || w < 0.0)
            throw ValidationError("weight at index " + std::to_string(i) +
                                  " is negative or non-finite");
        total += w;
    }
    if (total <= 0.0) throw ValidationError("weights have zero total mass");
    for (idx i = 0; i < n_; ++i) {
        const double w = weights[static_cast<std::size_t>(i)] / total;
        if (w == 0.0) {
            if (!opts.allow_zero_mass)
                throw ValidationError("zero-mass point at index " + std::to_string(i) +
                                      " (pass allow_zero_mass to keep it)");
            fully_supported_ = false;
        }
        measure_[static_cast<std::size_t>(i)] = w;
    }
}

MmSpace MmSpace::from_points(vec<double> coords, idx n, idx dim, std::span<const double> weights,
                             SpaceOptions opts) {
    if (n < 1 || dim < 1) throw ValidationError("point cloud must have n >= 1 and dim >= 1");
    if (static_cast<idx>(coords.size()) != n * dim)
        throw ValidationError("coordinate table size does not match n x dim");
    for (double v : coords)
        if (!std::isfinite(v)) throw ValidationError("non-finite coordinate");
    MmSpace s;
    s.kind_ = SpaceKind::euclidean;
    s.n_ = n;
    s.dim_ = dim;
    s.coords_ = std::move(coords);
    s.set_measure(weights, opts);
    return s;
}

MmSpace MmSpace::from_graph(std::span<const GraphEdge> edges, idx n,
                            std::span<const double> weights, SpaceOptions opts) {
    if (n < 1) throw ValidationError("graph must have at least one node");
    MmSpace s;
    s.kind_ = SpaceKind::graph;
    s.n_ = n;
    vec<idx> degree(static_cast<std::size_t>(n), 0);
    for (const auto& e : edges) {
        if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n)
            throw ValidationError("edge endpoint out of range: " + std::to_string(e.u) + "-" +
                                  std::to_string(e.v));
        if (!std::isfinite(e.w) || e.w < 0.0)
            throw ValidationError("edge weight must be finite and nonnegative");
        ++degree[static_cast<std::size_t>(e.u)];
        ++degree[static_cast<std::size_t>(e.v)];
    }
    s.adj_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (idx i = 0; i < n; ++i)
        s.adj_offsets_[static_cast<std::size_t>(i) + 1] =
            s.adj_offsets_[static_cast<std::size_t>(i)] + degree[static_cast<std::size_t>(i)];
    s.adj_targets_.assign(static_cast<std::size_t>(edges.size()) * 2, 0);
    s.adj_weights_.assign(static_cast<std::size_t>(edges.size()) * 2, 0.0);
    vec<idx> cursor(s.adj_offsets_.begin(), s.adj_offsets_.end() - 1);
    for (const auto& e : edges) {
        auto put = [&](idx from, idx to) {
            const idx at = cursor[static_cast<std::size_t>(from)]++;
            s.adj_targets_[static_cast<std::size_t>(at)] = to;
            s.adj_weights_[static_cast<std::size_t>(at)] = e.w;
        };
        put(e.u, e.v);
        put(e.v, e.u);
    }
    s.set_measure(weights, opts);
    return s;
}

MmSpace MmSpace::from_dense(vec<double> matrix, idx n, std::span<const double> weights,
                            SpaceOptions opts) {
    if (n < 1) throw ValidationError("dense space must have at least one point");
    if (static_cast<idx>(matrix.size()) != n * n)
        throw ValidationError("distance matrix size does not match n x n");
    validate_dense(matrix, n);
    MmSpace s;
    s.kind_ = SpaceKind::dense;
    s.n_ = n;
    s.matrix_ = std::move(matrix);
    s.set_measure(weights, opts);
    return s;
}

vec<double> MmSpace::graph_sssp(idx source) const {
    vec<double> dist(static_cast<std::size_t>(n_), kInf);
    using Entry = std::pair<double, idx>;
    std::priority_queue<Entry, vec<Entry>, std::greater<>> heap;
    dist[static_cast<std::size_t>(source)] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[static_cast<std::size_t>(u)]) continue; // stale entry
        const idx begin = adj_offsets_[static_cast<std::size_t>(u)];
        const idx end = adj_offsets_[static_cast<std::size_t>(u) + 1];
        for (idx e = begin; e < end; ++e) {
            const idx v = adj_targets_[static_cast<std::size_t>(e)];
            const double nd = d + adj_weights_[static_cast<std::size_t>(e)];
            if (nd < dist[static_cast<std::size_t>(v)]) {
                dist[static_cast<std::size_t>(v)] = nd;
                heap.emplace(nd, v);
            }
        }
    }
    return dist;
}

void MmSpace::apply_unreachable_policy(vec<double>& row, idx source) const {
    bool has_inf = false;
    double max_finite = 0.0;
    for (double v : row) {
        if (std::isinf(v))
            has_inf = true;
        else
            max_finite = std::max(max_finite, v);
    }
    if (!has_inf) return;
    if (opts_.inf_replace < 0.0)
        throw ValidationError("disconnected graph: some nodes are unreachable from " +
                              std::to_string(source));
    const double sub = opts_.inf_replace * max_finite;
    for (double& v : row)
        if (std::isinf(v)) v = sub;
}

double MmSpace::distance(idx i, idx j) const {
    switch (kind_) {
    case SpaceKind::dense:
        return matrix_[i * n_ + j];
    case SpaceKind::euclidean:
        return euclidean(point(i), point(j), dim_);
    case SpaceKind::graph: {
        const idx targets[1] = {j};
        return row_distances(i, targets)[0];
    }
    }
    return 0.0;
}

vec<double> MmSpace::row_distances(idx source) const {
    switch (kind_) {
    case SpaceKind::dense: {
        vec<double> row(matrix_.begin() + source * n_, matrix_.begin() + (source + 1) * n_);
        return row;
    }
    case SpaceKind::euclidean: {
        vec<double> row(static_cast<std::size_t>(n_), 0.0);
        const double* src = point(source);
        for (idx j = 0; j < n_; ++j) row[static_cast<std::size_t>(j)] = euclidean(src, point(j), dim_);
        return row;
    }
    case SpaceKind::graph: {
        vec<double> row = graph_sssp(source);
        apply_unreachable_policy(row, source);
        return row;
    }
    }
    return {};
}

vec<double> MmSpace::row_distances(idx source, std::span<const idx> targets) const {
    for (idx t : targets)
        if (t < 0 || t >= n_) throw ValidationError("target index out of range");
    if (source < 0 || source >= n_) throw ValidationError("source index out of range");
    if (kind_ == SpaceKind::graph) {
        vec<double> full = graph_sssp(source);
        vec<double> out(targets.size(), 0.0);
        bool has_inf = false;
        double max_finite = 0.0;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const double v = full[static_cast<std::size_t>(targets[t])];
            out[t] = v;
            if (std::isinf(v))
                has_inf = true;
            else
                max_finite = std::max(max_finite, v);
        }
        if (has_inf) {
            if (opts_.inf_replace < 0.0)
                throw ValidationError("disconnected graph: unreachable target from " +
                                      std::to_string(source));
            for (double& v : out)
                if (std::isinf(v)) v = opts_.inf_replace * max_finite;
        }
        return out;
    }
    vec<double> out(targets.size(), 0.0);
    for (std::size_t t = 0; t < targets.size(); ++t)
        out[t] = distance(source, targets[t]);
    return out;
}

vec<double> MmSpace::batch_row_distances(std::span<const idx> sources) const {
    const idx m = static_cast<idx>(sources.size());
    vec<double> rows(static_cast<std::size_t>(m * n_), 0.0);
    std::exception_ptr failure = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(parallel::threads()) \
    if (parallel::threads() > 1 && m > 1)
#endif
    for (idx s = 0; s < m; ++s) {
        try {
            vec<double> row = row_distances(sources[static_cast<std::size_t>(s)]);
            std::copy(row.begin(), row.end(), rows.begin() + static_cast<std::size_t>(s * n_));
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

vec<double> MmSpace::full_distance_matrix() const {
    switch (kind_) {
    case SpaceKind::dense:
        return matrix_;
    case SpaceKind::euclidean: {
        vec<double> m(static_cast<std::size_t>(n_ * n_), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) \
    if (parallel::threads() > 1 && n_ > 256)
#endif
        for (idx i = 0; i < n_; ++i) {
            const double* xi = point(i);
            for (idx j = 0; j < n_; ++j)
                m[static_cast<std::size_t>(i * n_ + j)] = euclidean(xi, point(j), dim_);
        }
        return m;
    }
    case SpaceKind::graph: {
        if (n_ > opts_.dense_guard)
            throw ValidationError("refusing to materialize " + std::to_string(n_) + "x" +
                                  std::to_string(n_) +
                                  " geodesic matrix (dense_guard=" +
                                  std::to_string(opts_.dense_guard) + ")");
        vec<idx> all(static_cast<std::size_t>(n_), 0);
        for (idx i = 0; i < n_; ++i) all[static_cast<std::size_t>(i)] = i;
        return batch_row_distances(all);
    }
    }
    return {};
}

vec<double> rep_row_distances(const MmSpace& space, idx rep, std::span<const idx> targets) {
    return space.row_distances(rep, targets);
}

} // namespace qgw
