#pragma once

#include <span>
#include <vector>

#include "qgw/alloc.hpp"
#include "qgw/common.hpp"

namespace qgw {

/// Weighted atoms on the real line.
struct Atoms1D {
    vec<double> positions;
    vec<double> masses;
};

struct PlanEntry {
    idx i = 0;
    idx j = 0;
    double mass = 0.0;
};

/// Sparse transport plan; entries sorted by (i, j), masses strictly positive.
struct SparsePlan {
    std::vector<PlanEntry> entries;

    double mass_at(idx i, idx j) const;
    vec<double> row_sums(idx n) const;
    vec<double> col_sums(idx n) const;
};

/// Dense coupling with prescribed marginals.
struct DiscreteCoupling {
    idx rows = 0;
    idx cols = 0;
    vec<double> data; // row-major
    bool converged = true;

    static DiscreteCoupling product(std::span<const double> mu, std::span<const double> nu);

    double at(idx i, idx j) const { return data[static_cast<std::size_t>(i * cols + j)]; }
    double& at(idx i, idx j) { return data[static_cast<std::size_t>(i * cols + j)]; }
    vec<double> row_marginal() const;
    vec<double> col_marginal() const;
};

struct Plan1DResult {
    SparsePlan plan;
    double cost = 0.0;
};

/// Exact 1D optimal transport under quadratic ground cost. Both atom lists
/// are sorted by position (stable, so position ties keep their original
/// order) and matched by a northwest-corner mass sweep; the result is the
/// monotone optimal plan with at most k_a + k_b - 1 entries.
Plan1DResult solve_1d_ot(const Atoms1D& a, const Atoms1D& b);

struct SinkhornResult {
    DiscreteCoupling coupling;
    int iterations = 0;
};

/// Entropic transport by alternating scaling until the marginal L1 error
/// drops below tol. Switches to log-domain updates when epsilon is small
/// relative to the median cost (below 1e-2 * median). Non-convergence
/// returns the last iterate with the converged flag cleared.
SinkhornResult sinkhorn(std::span<const double> cost, idx n, idx k, std::span<const double> mu,
                        std::span<const double> nu, double epsilon, int max_iter = 1000,
                        double tol = 1e-9);

struct ExactOtResult {
    DiscreteCoupling coupling;
    double cost = 0.0;
};

/// Exact linear transport on the full bipartite graph via network simplex;
/// returns a vertex solution with at most n + k - 1 nonzeros. No size cap:
/// this is the engine behind both the oracle wrapper below and the global
/// solver's inner steps.
ExactOtResult exact_ot(std::span<const double> cost, idx n, idx k, std::span<const double> mu,
                       std::span<const double> nu);

/// Oracle-scale wrapper over exact_ot, capped at n * k <= 10^4.
ExactOtResult exact_ot_small(std::span<const double> cost, idx n, idx k,
                             std::span<const double> mu, std::span<const double> nu);

} // namespace qgw
