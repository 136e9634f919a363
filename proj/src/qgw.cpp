#include "qgw/qgw.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qgw/kernels.hpp"
#include "qgw/parallel.hpp"

namespace qgw {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Atoms1D profile_atoms(const BlockRadialProfile& profile) {
    Atoms1D atoms;
    atoms.positions = profile.radial;
    atoms.masses = profile.mass;
    return atoms;
}

// Thresholds the global coupling, renormalizes to total mass one, and pulls
// the row/column sums back onto the block measures when thresholding moved
// them (scaling sweeps on the fixed support). A row or column never loses
// its largest entry, so no block drops out of the expansion.
std::vector<PlanEntry> threshold_support(const DiscreteCoupling& global,
                                         std::span<const double> row_target,
                                         std::span<const double> col_target,
                                         double threshold) {
    const idx m_x = global.rows;
    const idx m_y = global.cols;
    vec<char> keep(static_cast<std::size_t>(m_x * m_y), 0);
    vec<idx> row_best(static_cast<std::size_t>(m_x), -1);
    vec<idx> col_best(static_cast<std::size_t>(m_y), -1);
    for (idx p = 0; p < m_x; ++p)
        for (idx q = 0; q < m_y; ++q) {
            const double v = global.at(p, q);
            if (row_best[static_cast<std::size_t>(p)] == -1 ||
                v > global.at(p, row_best[static_cast<std::size_t>(p)]))
                row_best[static_cast<std::size_t>(p)] = q;
            if (col_best[static_cast<std::size_t>(q)] == -1 ||
                v > global.at(col_best[static_cast<std::size_t>(q)], q))
                col_best[static_cast<std::size_t>(q)] = p;
            if (v > threshold) keep[static_cast<std::size_t>(p * m_y + q)] = 1;
        }
    for (idx p = 0; p < m_x; ++p)
        keep[static_cast<std::size_t>(p * m_y + row_best[static_cast<std::size_t>(p)])] = 1;
    for (idx q = 0; q < m_y; ++q)
        keep[static_cast<std::size_t>(col_best[static_cast<std::size_t>(q)] * m_y + q)] = 1;

    vec<double> masses(static_cast<std::size_t>(m_x * m_y), 0.0);
    double total = 0.0;
    for (idx c = 0; c < m_x * m_y; ++c)
        if (keep[static_cast<std::size_t>(c)]) {
            masses[static_cast<std::size_t>(c)] = global.data[static_cast<std::size_t>(c)];
            total += masses[static_cast<std::size_t>(c)];
        }
    if (total <= 0.0) throw NumericalError("global coupling support vanished after thresholding");
    for (double& v : masses) v /= total;

    // Marginal repair, only when thresholding actually moved the sums.
    for (int sweep = 0; sweep < 100; ++sweep) {
        double drift = 0.0;
        vec<double> rows(static_cast<std::size_t>(m_x), 0.0);
        for (idx p = 0; p < m_x; ++p)
            for (idx q = 0; q < m_y; ++q)
                rows[static_cast<std::size_t>(p)] += masses[static_cast<std::size_t>(p * m_y + q)];
        for (idx p = 0; p < m_x; ++p) {
            const double want = row_target[static_cast<std::size_t>(p)];
            const double have = rows[static_cast<std::size_t>(p)];
            drift = std::max(drift, std::abs(want - have));
            if (have > 0.0) {
                const double fix = want / have;
                for (idx q = 0; q < m_y; ++q)
                    masses[static_cast<std::size_t>(p * m_y + q)] *= fix;
            }
        }
        vec<double> cols(static_cast<std::size_t>(m_y), 0.0);
        for (idx p = 0; p < m_x; ++p)
            for (idx q = 0; q < m_y; ++q)
                cols[static_cast<std::size_t>(q)] += masses[static_cast<std::size_t>(p * m_y + q)];
        for (idx q = 0; q < m_y; ++q) {
            const double want = col_target[static_cast<std::size_t>(q)];
            const double have = cols[static_cast<std::size_t>(q)];
            drift = std::max(drift, std::abs(want - have));
            if (have > 0.0) {
                const double fix = want / have;
                for (idx p = 0; p < m_x; ++p)
                    masses[static_cast<std::size_t>(p * m_y + q)] *= fix;
            }
        }
        if (drift < 1e-13) break;
    }

    std::vector<PlanEntry> entries;
    for (idx p = 0; p < m_x; ++p)
        for (idx q = 0; q < m_y; ++q) {
            const double v = masses[static_cast<std::size_t>(p * m_y + q)];
            if (v > 0.0) entries.push_back({p, q, v});
        }
    return entries;
}

struct FeatureView {
    const vec<double>* table = nullptr;
    idx dim = 0;
    const double* row(idx i) const { return table->data() + i * dim; }
};

double feature_sq_dist(const FeatureView& fx, idx i, const FeatureView& fy, idx j) {
    double s = 0.0;
    const double* a = fx.row(i);
    const double* b = fy.row(j);
    for (idx d = 0; d < fx.dim; ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

double feature_norm(const FeatureView& f, idx i) {
    double s = 0.0;
    const double* a = f.row(i);
    for (idx d = 0; d < f.dim; ++d) s += a[d] * a[d];
    return std::sqrt(s);
}

SparsePlan blend_plans(const SparsePlan& base, const SparsePlan& other, double beta) {
    std::map<std::pair<idx, idx>, double> merged;
    for (const auto& e : base.entries) merged[{e.i, e.j}] += (1.0 - beta) * e.mass;
    for (const auto& e : other.entries) merged[{e.i, e.j}] += beta * e.mass;
    SparsePlan out;
    for (const auto& [key, mass] : merged)
        if (mass > 0.0) out.entries.push_back({key.first, key.second, mass});
    return out;
}

// Feature-based local plan: exact transport on squared feature distances for
// small blocks, 1D transport on feature norms otherwise.
SparsePlan local_feature_match(const PointedPartition& px, int p, const PointedPartition& py,
                               int q, const FeatureView& fx, const FeatureView& fy,
                               const BlockRadialProfile& prof_x, const BlockRadialProfile& prof_y,
                               int exact_cap, bool& used_exact) {
    const auto& ux = px.block(p);
    const auto& vy = py.block(q);
    const idx na = static_cast<idx>(ux.size());
    const idx nb = static_cast<idx>(vy.size());
    if (na <= exact_cap && nb <= exact_cap) {
        used_exact = true;
        vec<double> cost(static_cast<std::size_t>(na * nb), 0.0);
        for (idx i = 0; i < na; ++i)
            for (idx j = 0; j < nb; ++j)
                cost[static_cast<std::size_t>(i * nb + j)] =
                    feature_sq_dist(fx, ux[static_cast<std::size_t>(i)], fy,
                                    vy[static_cast<std::size_t>(j)]);
        auto res = exact_ot(cost, na, nb, prof_x.mass, prof_y.mass);
        SparsePlan plan;
        for (idx i = 0; i < na; ++i)
            for (idx j = 0; j < nb; ++j) {
                const double v = res.coupling.at(i, j);
                if (v > 0.0) plan.entries.push_back({i, j, v});
            }
        return plan;
    }
    used_exact = false;
    Atoms1D a, b;
    a.masses = prof_x.mass;
    b.masses = prof_y.mass;
    a.positions.reserve(ux.size());
    b.positions.reserve(vy.size());
    for (idx i : ux) a.positions.push_back(feature_norm(fx, i));
    for (idx j : vy) b.positions.push_back(feature_norm(fy, j));
    return solve_1d_ot(a, b).plan;
}

struct MatchInputs {
    const MmSpace& x;
    const PointedPartition& px;
    const MmSpace& y;
    const PointedPartition& py;
    const FeatureView* fx = nullptr; // null for the plain pipeline
    const FeatureView* fy = nullptr;
};

void block_stats(const PointedPartition& part, idx& min_b, idx& max_b) {
    min_b = part.block(0).size();
    max_b = min_b;
    for (int p = 0; p < part.m(); ++p) {
        const idx s = static_cast<idx>(part.block(p).size());
        min_b = std::min(min_b, s);
        max_b = std::max(max_b, s);
    }
}

bool can_densify(const MmSpace& space) {
    return space.kind() != SpaceKind::graph || space.size() <= space.options().dense_guard;
}

std::pair<QuantizationCoupling, MatchReport> run_pipeline(const MatchInputs& in,
                                                          const QgwConfig& config) {
    const auto t_start = Clock::now();
    in.px.validate(in.x);
    in.py.validate(in.y);
    const bool fused = in.fx != nullptr;
    if (fused && in.fx->dim != in.fy->dim)
        throw ValidationError("feature dimension mismatch between the two spaces");
    if (!(config.beta >= 0.0 && config.beta <= 1.0))
        throw ValidationError("beta must lie in [0, 1]");

    MatchReport report;
    report.algorithm = fused ? "qfgw" : "qgw";
    report.n_x = in.x.size();
    report.n_y = in.y.size();
    report.m_x = in.px.m();
    report.m_y = in.py.m();
    report.alpha = config.alpha;
    report.beta = config.beta;
    report.support_threshold = config.support_threshold;
    report.inner = config.gw.inner == GwConfig::Inner::exact ? "exact" : "entropic";
    report.epsilon = config.gw.epsilon;
    report.metric_interpretation = in.px.m() == in.py.m();
    block_stats(in.px, report.min_block_x, report.max_block_x);
    block_stats(in.py, report.min_block_y, report.max_block_y);

    auto t = Clock::now();
    Quantization qx = quantize(in.x, in.px);
    Quantization qy = quantize(in.y, in.py);
    report.quantize_seconds = seconds_since(t);

    const int m_x = in.px.m();
    const int m_y = in.py.m();

    t = Clock::now();
    GwSolveResult global;
    if (fused && config.alpha > 0.0) {
        vec<double> rep_feature_cost(static_cast<std::size_t>(m_x) * static_cast<std::size_t>(m_y),
                                     0.0);
        for (int p = 0; p < m_x; ++p)
            for (int q = 0; q < m_y; ++q)
                rep_feature_cost[static_cast<std::size_t>(p) * m_y + q] = feature_sq_dist(
                    *in.fx, in.px.representative(p), *in.fy, in.py.representative(q));
        global = solve_fgw(qx.rep.rep_distances, m_x, qy.rep.rep_distances, m_y, rep_feature_cost,
                           qx.rep.rep_measure, qy.rep.rep_measure, config.alpha, config.gw);
    } else {
        global = solve_gw(qx.rep.rep_distances, m_x, qy.rep.rep_distances, m_y,
                          qx.rep.rep_measure, qy.rep.rep_measure, config.gw);
    }
    report.global_iterations = global.iterations;
    report.inner_converged = global.inner_converged;
    report.global_seconds = seconds_since(t);

    QuantizationCoupling qc;
    qc.n_x = in.x.size();
    qc.n_y = in.y.size();
    qc.m_x = m_x;
    qc.m_y = m_y;
    qc.global = threshold_support(global.coupling, qx.rep.rep_measure, qy.rep.rep_measure,
                                  config.support_threshold);
    report.support_size = static_cast<idx>(qc.global.size());

    {
        DiscreteCoupling thresholded;
        thresholded.rows = m_x;
        thresholded.cols = m_y;
        thresholded.data.assign(static_cast<std::size_t>(m_x) * static_cast<std::size_t>(m_y), 0.0);
        for (const auto& e : qc.global) thresholded.at(e.i, e.j) = e.mass;
        report.global_loss =
            gw_loss(qx.rep.rep_distances, m_x, qy.rep.rep_distances, m_y, thresholded);
    }

    t = Clock::now();
    qc.locals.resize(qc.global.size());
    const idx pairs = static_cast<idx>(qc.global.size());
    std::exception_ptr failure = nullptr;
    int exact_count = 0;
    int profile_count = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(parallel::threads()) \
    reduction(+ : exact_count, profile_count) if (parallel::threads() > 1 && pairs > 1)
#endif
    for (idx k = 0; k < pairs; ++k) {
        try {
            const int p = static_cast<int>(qc.global[static_cast<std::size_t>(k)].i);
            const int q = static_cast<int>(qc.global[static_cast<std::size_t>(k)].j);
            const auto& prof_x = qx.profiles[static_cast<std::size_t>(p)];
            const auto& prof_y = qy.profiles[static_cast<std::size_t>(q)];
            SparsePlan plan;
            if (!fused || config.beta == 0.0) {
                plan = local_linear_match(prof_x, prof_y);
            } else if (config.beta == 1.0) {
                bool used_exact = false;
                plan = local_feature_match(in.px, p, in.py, q, *in.fx, *in.fy, prof_x, prof_y,
                                           config.local_feature_exact_cap, used_exact);
                (used_exact ? exact_count : profile_count) += 1;
            } else {
                bool used_exact = false;
                SparsePlan radial = local_linear_match(prof_x, prof_y);
                SparsePlan feature =
                    local_feature_match(in.px, p, in.py, q, *in.fx, *in.fy, prof_x, prof_y,
                                        config.local_feature_exact_cap, used_exact);
                (used_exact ? exact_count : profile_count) += 1;
                plan = blend_plans(radial, feature, config.beta);
            }
            qc.locals[static_cast<std::size_t>(k)] = std::move(plan);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    report.local_feature_exact = exact_count;
    report.local_feature_profile = profile_count;
    report.local_seconds = seconds_since(t);

    t = Clock::now();
    qc.source_partition = std::make_shared<PointedPartition>(in.px);
    qc.target_partition = std::make_shared<PointedPartition>(in.py);
    report.coupling_nnz = qc.nnz();
    report.support_bound = qc.support_bound();
    report.assemble_seconds = seconds_since(t);

    if (config.compute_bounds) {
        t = Clock::now();
        double sq_x = 0.0;
        for (int p = 0; p < m_x; ++p) {
            const auto& prof = qx.profiles[static_cast<std::size_t>(p)];
            double s2 = 0.0;
            for (std::size_t l = 0; l < prof.radial.size(); ++l)
                s2 += prof.radial[l] * prof.radial[l] * prof.mass[l];
            sq_x += in.px.block_measure()[static_cast<std::size_t>(p)] * s2;
        }
        double sq_y = 0.0;
        for (int q = 0; q < m_y; ++q) {
            const auto& prof = qy.profiles[static_cast<std::size_t>(q)];
            double s2 = 0.0;
            for (std::size_t l = 0; l < prof.radial.size(); ++l)
                s2 += prof.radial[l] * prof.radial[l] * prof.mass[l];
            sq_y += in.py.block_measure()[static_cast<std::size_t>(q)] * s2;
        }
        report.q_px = std::sqrt(sq_x);
        report.q_py = std::sqrt(sq_y);
        try {
            const vec<double> diam_x = block_diameters(in.x, in.px);
            const vec<double> diam_y = block_diameters(in.y, in.py);
            report.eps_x = *std::max_element(diam_x.begin(), diam_x.end());
            report.eps_y = *std::max_element(diam_y.begin(), diam_y.end());
            report.distortion_bound = 2.0 * (*report.q_px + *report.q_py) +
                                      8.0 * std::max(*report.eps_x, *report.eps_y);
        } catch (const ValidationError&) {
            // Too large for the exact scan; bound stays unreported.
        }
        report.bounds_seconds = seconds_since(t);
    }

    if (config.compute_full_loss && qc.n_x * qc.n_y <= 1000000 && can_densify(in.x) &&
        can_densify(in.y)) {
        const DiscreteCoupling dense = densify_small(qc);
        const vec<double> dx = in.x.full_distance_matrix();
        const vec<double> dy = in.y.full_distance_matrix();
        report.full_gw_loss = gw_loss(dx, qc.n_x, dy, qc.n_y, dense);
    }

    report.total_seconds = seconds_since(t_start);
    return {std::move(qc), std::move(report)};
}

} // namespace

idx QuantizationCoupling::support_bound() const {
    idx bound = 0;
    for (const auto& e : global)
        bound += static_cast<idx>(source_partition->block(static_cast<int>(e.i)).size()) +
                 static_cast<idx>(target_partition->block(static_cast<int>(e.j)).size()) - 1;
    return bound;
}

idx QuantizationCoupling::nnz() const {
    idx count = 0;
    for (const auto& plan : locals) count += static_cast<idx>(plan.entries.size());
    return count;
}

SparsePlan local_linear_match(const BlockRadialProfile& profile_x,
                              const BlockRadialProfile& profile_y) {
    return solve_1d_ot(profile_atoms(profile_x), profile_atoms(profile_y)).plan;
}

std::pair<QuantizationCoupling, MatchReport> match_qgw(const MmSpace& x,
                                                       const PointedPartition& px,
                                                       const MmSpace& y,
                                                       const PointedPartition& py,
                                                       const QgwConfig& config) {
    MatchInputs in{x, px, y, py, nullptr, nullptr};
    return run_pipeline(in, config);
}

std::pair<QuantizationCoupling, MatchReport> match_qfgw(
    const MmSpace& x, const PointedPartition& px, const vec<double>& features_x, idx feat_dim_x,
    const MmSpace& y, const PointedPartition& py, const vec<double>& features_y, idx feat_dim_y,
    const QgwConfig& config) {
    if (feat_dim_x < 1 || feat_dim_y < 1) throw ValidationError("feature dimension must be >= 1");
    if (static_cast<idx>(features_x.size()) != x.size() * feat_dim_x ||
        static_cast<idx>(features_y.size()) != y.size() * feat_dim_y)
        throw ValidationError("feature table size mismatch");
    FeatureView fx{&features_x, feat_dim_x};
    FeatureView fy{&features_y, feat_dim_y};
    MatchInputs in{x, px, y, py, &fx, &fy};
    return run_pipeline(in, config);
}

SparseRow expand_row(const QuantizationCoupling& qc, idx x) {
    if (x < 0 || x >= qc.n_x) throw ValidationError("point index out of range");
    SparseRow row;
    const auto& px = *qc.source_partition;
    const auto& py = *qc.target_partition;
    const int p = px.block_of(x);
    if (p < 0) return row; // zero-mass point: empty row
    const idx lx = px.local_of(x);

    std::vector<std::pair<idx, double>> acc;
    const auto begin = std::lower_bound(
        qc.global.begin(), qc.global.end(), static_cast<idx>(p),
        [](const PlanEntry& e, idx value) { return e.i < value; });
    for (auto it = begin; it != qc.global.end() && it->i == p; ++it) {
        const int q = static_cast<int>(it->j);
        const auto& plan = qc.locals[static_cast<std::size_t>(it - qc.global.begin())];
        const auto& members = py.block(q);
        const auto lo = std::lower_bound(plan.entries.begin(), plan.entries.end(), lx,
                                         [](const PlanEntry& e, idx value) { return e.i < value; });
        for (auto pe = lo; pe != plan.entries.end() && pe->i == lx; ++pe)
            acc.emplace_back(members[static_cast<std::size_t>(pe->j)], it->mass * pe->mass);
    }
    std::sort(acc.begin(), acc.end());
    for (const auto& [j, v] : acc) {
        row.indices.push_back(j);
        row.raw.push_back(v);
        row.total += v;
    }
    row.normalized = row.raw;
    if (row.total > 0.0)
        for (double& v : row.normalized) v /= row.total;
    return row;
}

idx argmax_match(const QuantizationCoupling& qc, idx x) {
    const SparseRow row = expand_row(qc, x);
    if (row.indices.empty()) return 0;
    idx best = row.indices[0];
    double best_mass = row.raw[0];
    for (std::size_t t = 1; t < row.indices.size(); ++t) {
        if (row.raw[t] > best_mass) {
            best_mass = row.raw[t];
            best = row.indices[t];
        }
    }
    return best;
}

DiscreteCoupling densify_small(const QuantizationCoupling& qc) {
    if (qc.n_x * qc.n_y > 1000000)
        throw ValidationError("densify_small capped at 10^6 cells");
    DiscreteCoupling dense;
    dense.rows = qc.n_x;
    dense.cols = qc.n_y;
    dense.data.assign(static_cast<std::size_t>(qc.n_x * qc.n_y), 0.0);
    const auto& px = *qc.source_partition;
    const auto& py = *qc.target_partition;
    for (std::size_t k = 0; k < qc.global.size(); ++k) {
        const auto& g = qc.global[k];
        const auto& ux = px.block(static_cast<int>(g.i));
        const auto& vy = py.block(static_cast<int>(g.j));
        for (const auto& e : qc.locals[k].entries) {
            const idx gi = ux[static_cast<std::size_t>(e.i)];
            const idx gj = vy[static_cast<std::size_t>(e.j)];
            dense.at(gi, gj) += g.mass * e.mass;
        }
    }
    return dense;
}

vec<double> block_diameters(const MmSpace& space, const PointedPartition& partition) {
    const int m = partition.m();
    vec<double> diam(static_cast<std::size_t>(m), 0.0);
    switch (space.kind()) {
    case SpaceKind::euclidean:
        for (int p = 0; p < m; ++p) {
            const auto& members = partition.block(p);
            diam[static_cast<std::size_t>(p)] = kernels::max_pairwise_distance(
                space.coords().data(), space.dim(),
                std::span<const idx>(members.data(), members.size()));
        }
        break;
    case SpaceKind::dense:
        for (int p = 0; p < m; ++p) {
            const auto& members = partition.block(p);
            diam[static_cast<std::size_t>(p)] = kernels::max_pairwise_from_matrix(
                space.matrix().data(), space.size(),
                std::span<const idx>(members.data(), members.size()));
        }
        break;
    case SpaceKind::graph: {
        if (space.size() > space.options().dense_guard)
            throw ValidationError("graph too large for exact block diameters");
        for (int p = 0; p < m; ++p) {
            const auto& members = partition.block(p);
            double best = 0.0;
            for (std::size_t a = 0; a < members.size(); ++a) {
                const vec<double> row = space.row_distances(
                    members[a], std::span<const idx>(members.data(), members.size()));
                for (double v : row) best = std::max(best, v);
            }
            diam[static_cast<std::size_t>(p)] = best;
        }
        break;
    }
    }
    return diam;
}

} // namespace qgw
