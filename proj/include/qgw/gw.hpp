#pragma once

#include <span>
#include <vector>

#include "qgw/ot.hpp"

namespace qgw {

struct GwConfig {
    enum class Inner { exact, entropic };
    enum class Init { product, identity_if_square, provided };

    Inner inner = Inner::exact;
    /// Entropic weight; values <= 0 resolve to 1e-2 times the median of the
    /// current linearized cost.
    double epsilon = 0.0;
    int max_outer_iter = 200;
    /// Relative loss-change stopping threshold.
    double conv_tol = 1e-9;
    Init init = Init::product;
    const DiscreteCoupling* provided_init = nullptr;
    int sinkhorn_max_iter = 2000;
    double sinkhorn_tol = 1e-9;
    /// When set, entropic inner steps that fail to converge raise instead of
    /// carrying a flag.
    bool strict = false;
};

/// Metric-distortion loss of a coupling, computed through the marginal
/// decomposition (two quadratic forms minus twice the coupling-weighted
/// cross term) rather than the quartic sum.
double gw_loss(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
               const DiscreteCoupling& mu);

/// Literal four-index sum; capped at n * k <= 200 and kept as the oracle
/// for the decomposed evaluation above.
double gw_loss_brute(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
                     const DiscreteCoupling& mu);

struct GwSolveResult {
    DiscreteCoupling coupling;
    double loss = 0.0;
    int iterations = 0;
    bool inner_converged = true;
    /// Loss after each outer iteration; non-increasing by construction.
    std::vector<double> trace;
};

/// Conditional-gradient (Frank-Wolfe) descent on the quadratic loss:
/// linearize at the current coupling, solve the linear transport subproblem
/// exactly or entropically, and take the closed-form optimal step in [0, 1].
/// Finds a local minimizer; the problem is not convex.
GwSolveResult solve_gw(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
                       std::span<const double> mu_x, std::span<const double> mu_y,
                       const GwConfig& config = {});

/// Same scheme on the alpha-blend of metric loss and feature transport cost
/// (feature_cost carries squared feature distances). alpha = 0 matches
/// solve_gw exactly; alpha = 1 is a single linear transport solve.
GwSolveResult solve_fgw(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
                        std::span<const double> feature_cost, std::span<const double> mu_x,
                        std::span<const double> mu_y, double alpha, const GwConfig& config = {});

} // namespace qgw
