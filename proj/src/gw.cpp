#include "qgw/gw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qgw/kernels.hpp"

namespace qgw {

namespace {

void check_dims(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
                const DiscreteCoupling& mu) {
    if (static_cast<idx>(dx.size()) != n * n || static_cast<idx>(dy.size()) != k * k)
        throw ValidationError("distance matrix size mismatch");
    if (mu.rows != n || mu.cols != k) throw ValidationError("coupling dimension mismatch");
}

// B = dx * mu * dy, the cross term of the decomposed loss.
void cross_matrix(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
                  const double* mu, vec<double>& tmp, vec<double>& out) {
    tmp.assign(static_cast<std::size_t>(n * k), 0.0);
    out.assign(static_cast<std::size_t>(n * k), 0.0);
    kernels::matmul(dx.data(), mu, tmp.data(), n, n, k);
    kernels::matmul(tmp.data(), dy.data(), out.data(), n, k, k);
}

// The decomposition evaluates the loss as a difference of terms of size
// `scale`, so anything below the cancellation floor is numerical dust.
double snap_loss(double loss, double scale) {
    return std::abs(loss) <= 1e-13 * scale ? 0.0 : loss;
}

double resolve_epsilon(const GwConfig& config, std::span<const double> cost) {
    if (config.epsilon > 0.0) return config.epsilon;
    vec<double> tmp(cost.begin(), cost.end());
    const std::size_t mid = tmp.size() / 2;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid), tmp.end());
    const double med = tmp[mid];
    return med > 0.0 ? 1e-2 * med : 1e-2;
}

DiscreteCoupling inner_solve(std::span<const double> cost, idx n, idx k,
                             std::span<const double> mu_x, std::span<const double> mu_y,
                             const GwConfig& config, bool& inner_converged) {
    if (config.inner == GwConfig::Inner::exact)
        return exact_ot(cost, n, k, mu_x, mu_y).coupling;
    const double eps = resolve_epsilon(config, cost);
    auto res = sinkhorn(cost, n, k, mu_x, mu_y, eps, config.sinkhorn_max_iter,
                        config.sinkhorn_tol);
    if (!res.coupling.converged) {
        if (config.strict)
            throw NumericalError("entropic inner step failed to converge");
        inner_converged = false;
    }
    return std::move(res.coupling);
}

DiscreteCoupling initial_coupling(idx n, idx k, std::span<const double> mu_x,
                                  std::span<const double> mu_y, const GwConfig& config) {
    switch (config.init) {
    case GwConfig::Init::product:
        return DiscreteCoupling::product(mu_x, mu_y);
    case GwConfig::Init::identity_if_square: {
        if (n != k) throw ValidationError("identity init needs equal sizes");
        for (idx i = 0; i < n; ++i)
            if (std::abs(mu_x[static_cast<std::size_t>(i)] - mu_y[static_cast<std::size_t>(i)]) >
                1e-12)
                throw ValidationError("identity init needs matching measures");
        DiscreteCoupling c;
        c.rows = n;
        c.cols = n;
        c.data.assign(static_cast<std::size_t>(n * n), 0.0);
        for (idx i = 0; i < n; ++i) c.at(i, i) = mu_x[static_cast<std::size_t>(i)];
        return c;
    }
    case GwConfig::Init::provided: {
        if (config.provided_init == nullptr) throw ValidationError("no initial coupling provided");
        if (config.provided_init->rows != n || config.provided_init->cols != k)
            throw ValidationError("provided initial coupling has wrong shape");
        return *config.provided_init;
    }
    }
    throw ValidationError("unknown init mode");
}

} // namespace

double gw_loss(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
               const DiscreteCoupling& mu) {
    check_dims(dx, n, dy, k, mu);
    const vec<double> p = mu.row_marginal();
    const vec<double> q = mu.col_marginal();
    const double const_x = kernels::quad_form_sq(dx.data(), p.data(), n);
    const double const_y = kernels::quad_form_sq(dy.data(), q.data(), k);
    vec<double> tmp, cross;
    cross_matrix(dx, n, dy, k, mu.data.data(), tmp, cross);
    const double mixed = kernels::dot(cross.data(), mu.data.data(), n * k);
    return snap_loss(const_x + const_y - 2.0 * mixed, const_x + const_y);
}

double gw_loss_brute(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
                     const DiscreteCoupling& mu) {
    check_dims(dx, n, dy, k, mu);
    if (n * k > 200) throw ValidationError("gw_loss_brute capped at n*k <= 200");
    double total = 0.0;
    for (idx i = 0; i < n; ++i)
        for (idx j = 0; j < k; ++j) {
            const double m1 = mu.at(i, j);
            if (m1 == 0.0) continue;
            for (idx a = 0; a < n; ++a)
                for (idx b = 0; b < k; ++b) {
                    const double m2 = mu.at(a, b);
                    if (m2 == 0.0) continue;
                    const double diff = dx[static_cast<std::size_t>(i * n + a)] -
                                        dy[static_cast<std::size_t>(j * k + b)];
                    total += diff * diff * m1 * m2;
                }
        }
    return total;
}

namespace {

struct BlendProblem {
    std::span<const double> dx;
    idx n;
    std::span<const double> dy;
    idx k;
    std::span<const double> feature_cost; // empty for the plain metric problem
    double alpha = 0.0;
};

GwSolveResult conditional_gradient(const BlendProblem& prob, std::span<const double> mu_x,
                                   std::span<const double> mu_y, const GwConfig& config) {
    const idx n = prob.n;
    const idx k = prob.k;
    const idx cells = n * k;
    const double metric_weight = 1.0 - prob.alpha;
    const bool fused = !prob.feature_cost.empty();

    GwSolveResult result;
    result.coupling = initial_coupling(n, k, mu_x, mu_y, config);
    DiscreteCoupling& mu = result.coupling;

    // All iterates share the same marginals, so the two quadratic-form
    // constants never change during the descent.
    const vec<double> p = mu.row_marginal();
    const vec<double> q = mu.col_marginal();
    const double const_xy = kernels::quad_form_sq(prob.dx.data(), p.data(), n) +
                            kernels::quad_form_sq(prob.dy.data(), q.data(), k);

    vec<double> tmp, cross_mu, cross_pi;
    cross_matrix(prob.dx, n, prob.dy, k, mu.data.data(), tmp, cross_mu);

    double mixed_mu = kernels::dot(cross_mu.data(), mu.data.data(), cells);
    double feat_mu = fused ? kernels::dot(prob.feature_cost.data(), mu.data.data(), cells) : 0.0;
    double loss = metric_weight * (const_xy - 2.0 * mixed_mu) + prob.alpha * feat_mu;
    result.trace.push_back(loss);

    vec<double> grad(static_cast<std::size_t>(cells), 0.0);
    vec<double> cx(static_cast<std::size_t>(n), 0.0);
    vec<double> cy(static_cast<std::size_t>(k), 0.0);
    for (idx i = 0; i < n; ++i) {
        double s = 0.0;
        const double* row = prob.dx.data() + i * n;
        for (idx a = 0; a < n; ++a) s += row[a] * row[a] * p[static_cast<std::size_t>(a)];
        cx[static_cast<std::size_t>(i)] = s;
    }
    for (idx j = 0; j < k; ++j) {
        double s = 0.0;
        const double* row = prob.dy.data() + j * k;
        for (idx b = 0; b < k; ++b) s += row[b] * row[b] * q[static_cast<std::size_t>(b)];
        cy[static_cast<std::size_t>(j)] = s;
    }

    const double scale = std::max(1.0, std::abs(loss));
    int it = 0;
    for (; it < config.max_outer_iter; ++it) {
        // grad = 2 * metric_weight * L(mu) + alpha * F, with
        // L_ij = cx_i + cy_j - 2 * cross_mu_ij.
        for (idx i = 0; i < n; ++i) {
            const double ci = cx[static_cast<std::size_t>(i)];
            double* grow = grad.data() + i * k;
            const double* crow = cross_mu.data() + i * k;
            for (idx j = 0; j < k; ++j)
                grow[j] = 2.0 * metric_weight * (ci + cy[static_cast<std::size_t>(j)] - 2.0 * crow[j]);
        }
        if (fused)
            for (idx c = 0; c < cells; ++c)
                grad[static_cast<std::size_t>(c)] +=
                    prob.alpha * prob.feature_cost[static_cast<std::size_t>(c)];

        const DiscreteCoupling pi =
            inner_solve(grad, n, k, mu_x, mu_y, config, result.inner_converged);

        cross_matrix(prob.dx, n, prob.dy, k, pi.data.data(), tmp, cross_pi);
        const double mixed_pp = kernels::dot(cross_pi.data(), pi.data.data(), cells);
        const double mixed_mp = kernels::dot(cross_mu.data(), pi.data.data(), cells);
        const double feat_pi =
            fused ? kernels::dot(prob.feature_cost.data(), pi.data.data(), cells) : 0.0;

        // Q(mu, delta) and Q(delta, delta) from the cached cross terms; the
        // delta marginals vanish, so only cross terms survive in Q(delta, delta).
        const double q_md = -2.0 * (mixed_mp - mixed_mu);
        const double q_dd = -2.0 * (mixed_pp - 2.0 * mixed_mp + mixed_mu);
        const double deriv0 = 2.0 * metric_weight * q_md + prob.alpha * (feat_pi - feat_mu);
        if (deriv0 >= -1e-15 * scale) break;

        const double a = metric_weight * q_dd;
        double t;
        if (a > 0.0)
            t = std::clamp(-deriv0 / (2.0 * a), 0.0, 1.0);
        else
            t = 1.0;
        if (t <= 0.0) break;

        for (idx c = 0; c < cells; ++c)
            mu.data[static_cast<std::size_t>(c)] =
                (1.0 - t) * mu.data[static_cast<std::size_t>(c)] +
                t * pi.data[static_cast<std::size_t>(c)];
        for (idx c = 0; c < cells; ++c)
            cross_mu[static_cast<std::size_t>(c)] =
                (1.0 - t) * cross_mu[static_cast<std::size_t>(c)] +
                t * cross_pi[static_cast<std::size_t>(c)];

        mixed_mu = (1.0 - t) * (1.0 - t) * mixed_mu + 2.0 * t * (1.0 - t) * mixed_mp +
                   t * t * mixed_pp;
        feat_mu = (1.0 - t) * feat_mu + t * feat_pi;
        const double new_loss = metric_weight * (const_xy - 2.0 * mixed_mu) + prob.alpha * feat_mu;
        const double rel = std::abs(loss - new_loss) / std::max(std::abs(loss), 1e-30);
        loss = new_loss;
        result.trace.push_back(loss);
        if (rel < config.conv_tol) {
            ++it;
            break;
        }
    }

    // Refresh the cached quantities once at the end; long descents can
    // accumulate drift in the incremental updates.
    cross_matrix(prob.dx, n, prob.dy, k, mu.data.data(), tmp, cross_mu);
    mixed_mu = kernels::dot(cross_mu.data(), mu.data.data(), cells);
    feat_mu = fused ? kernels::dot(prob.feature_cost.data(), mu.data.data(), cells) : 0.0;
    result.loss = snap_loss(metric_weight * (const_xy - 2.0 * mixed_mu) + prob.alpha * feat_mu,
                            metric_weight * const_xy + prob.alpha * std::abs(feat_mu));
    result.iterations = it;
    if (!std::isfinite(result.loss)) throw NumericalError("non-finite loss");
    return result;
}

} // namespace

GwSolveResult solve_gw(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
                       std::span<const double> mu_x, std::span<const double> mu_y,
                       const GwConfig& config) {
    if (static_cast<idx>(dx.size()) != n * n || static_cast<idx>(dy.size()) != k * k)
        throw ValidationError("distance matrix size mismatch");
    if (static_cast<idx>(mu_x.size()) != n || static_cast<idx>(mu_y.size()) != k)
        throw ValidationError("measure length mismatch");
    BlendProblem prob{dx, n, dy, k, {}, 0.0};
    return conditional_gradient(prob, mu_x, mu_y, config);
}

GwSolveResult solve_fgw(std::span<const double> dx, idx n, std::span<const double> dy, idx k,
                        std::span<const double> feature_cost, std::span<const double> mu_x,
                        std::span<const double> mu_y, double alpha, const GwConfig& config) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
    if (alpha == 0.0) return solve_gw(dx, n, dy, k, mu_x, mu_y, config);
    if (static_cast<idx>(feature_cost.size()) != n * k)
        throw ValidationError("feature cost size mismatch");
    if (alpha == 1.0) {
        // Pure feature transport: one linear solve.
        GwSolveResult result;
        bool converged = true;
        result.coupling = inner_solve(feature_cost, n, k, mu_x, mu_y, config, converged);
        result.inner_converged = converged;
        result.loss = kernels::dot(feature_cost.data(), result.coupling.data.data(), n * k);
        result.iterations = 1;
        result.trace.push_back(result.loss);
        return result;
    }
    BlendProblem prob{dx, n, dy, k, feature_cost, alpha};
    return conditional_gradient(prob, mu_x, mu_y, config);
}

} // namespace qgw
