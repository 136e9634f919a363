#include "qgw/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace qgw {

double SparsePlan::mass_at(idx i, idx j) const {
    for (const auto& e : entries)
        if (e.i == i && e.j == j) return e.mass;
    return 0.0;
}

vec<double> SparsePlan::row_sums(idx n) const {
    vec<double> sums(static_cast<std::size_t>(n), 0.0);
    for (const auto& e : entries) sums[static_cast<std::size_t>(e.i)] += e.mass;
    return sums;
}

vec<double> SparsePlan::col_sums(idx n) const {
    vec<double> sums(static_cast<std::size_t>(n), 0.0);
    for (const auto& e : entries) sums[static_cast<std::size_t>(e.j)] += e.mass;
    return sums;
}

DiscreteCoupling DiscreteCoupling::product(std::span<const double> mu, std::span<const double> nu) {
    DiscreteCoupling c;
    c.rows = static_cast<idx>(mu.size());
    c.cols = static_cast<idx>(nu.size());
    c.data.assign(mu.size() * nu.size(), 0.0);
    for (idx i = 0; i < c.rows; ++i)
        for (idx j = 0; j < c.cols; ++j)
            c.at(i, j) = mu[static_cast<std::size_t>(i)] * nu[static_cast<std::size_t>(j)];
    return c;
}

vec<double> DiscreteCoupling::row_marginal() const {
    vec<double> out(static_cast<std::size_t>(rows), 0.0);
    for (idx i = 0; i < rows; ++i) {
        double s = 0.0;
        for (idx j = 0; j < cols; ++j) s += at(i, j);
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

vec<double> DiscreteCoupling::col_marginal() const {
    vec<double> out(static_cast<std::size_t>(cols), 0.0);
    for (idx i = 0; i < rows; ++i)
        for (idx j = 0; j < cols; ++j) out[static_cast<std::size_t>(j)] += at(i, j);
    return out;
}

namespace {

void validate_masses(const Atoms1D& a, const char* side) {
    if (a.positions.size() != a.masses.size())
        throw ValidationError(std::string(side) + ": positions/masses length mismatch");
    if (a.positions.empty()) throw ValidationError(std::string(side) + ": empty atom list");
    for (std::size_t t = 0; t < a.masses.size(); ++t) {
        if (!std::isfinite(a.positions[t]))
            throw ValidationError(std::string(side) + ": non-finite position");
        if (!std::isfinite(a.masses[t]) || a.masses[t] < 0.0)
            throw ValidationError(std::string(side) + ": negative or non-finite mass");
    }
}

} // namespace

Plan1DResult solve_1d_ot(const Atoms1D& a, const Atoms1D& b) {
    validate_masses(a, "source atoms");
    validate_masses(b, "target atoms");
    const double total_a = std::accumulate(a.masses.begin(), a.masses.end(), 0.0);
    const double total_b = std::accumulate(b.masses.begin(), b.masses.end(), 0.0);
    if (std::abs(total_a - total_b) > 1e-9)
        throw ValidationError("unbalanced: atom masses differ by " +
                              std::to_string(std::abs(total_a - total_b)));

    const idx ka = static_cast<idx>(a.positions.size());
    const idx kb = static_cast<idx>(b.positions.size());
    std::vector<idx> order_a(static_cast<std::size_t>(ka));
    std::vector<idx> order_b(static_cast<std::size_t>(kb));
    std::iota(order_a.begin(), order_a.end(), idx{0});
    std::iota(order_b.begin(), order_b.end(), idx{0});
    // Stable: position ties keep original index order, so an atom placed
    // first (e.g. a block representative at radius 0) is consumed first.
    std::stable_sort(order_a.begin(), order_a.end(), [&](idx x, idx y) {
        return a.positions[static_cast<std::size_t>(x)] < a.positions[static_cast<std::size_t>(y)];
    });
    std::stable_sort(order_b.begin(), order_b.end(), [&](idx x, idx y) {
        return b.positions[static_cast<std::size_t>(x)] < b.positions[static_cast<std::size_t>(y)];
    });

    Plan1DResult result;
    idx ia = 0;
    idx ib = 0;
    double rem_a = a.masses[static_cast<std::size_t>(order_a[0])];
    double rem_b = b.masses[static_cast<std::size_t>(order_b[0])];
    while (ia < ka && ib < kb) {
        const double take = std::min(rem_a, rem_b);
        if (take > 0.0) {
            const idx oa = order_a[static_cast<std::size_t>(ia)];
            const idx ob = order_b[static_cast<std::size_t>(ib)];
            const double diff = a.positions[static_cast<std::size_t>(oa)] -
                                b.positions[static_cast<std::size_t>(ob)];
            result.plan.entries.push_back({oa, ob, take});
            result.cost += diff * diff * take;
            rem_a -= take;
            rem_b -= take;
        }
        if (rem_a <= 0.0) {
            ++ia;
            if (ia < ka) rem_a = a.masses[static_cast<std::size_t>(order_a[static_cast<std::size_t>(ia)])];
        }
        if (rem_b <= 0.0) {
            ++ib;
            if (ib < kb) rem_b = b.masses[static_cast<std::size_t>(order_b[static_cast<std::size_t>(ib)])];
        }
    }
    std::sort(result.plan.entries.begin(), result.plan.entries.end(),
              [](const PlanEntry& x, const PlanEntry& y) {
                  return x.i != y.i ? x.i < y.i : x.j < y.j;
              });
    return result;
}

namespace {

double median_of(std::span<const double> values) {
    vec<double> tmp(values.begin(), values.end());
    const std::size_t mid = tmp.size() / 2;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid), tmp.end());
    return tmp[mid];
}

double marginal_error(const DiscreteCoupling& p, std::span<const double> mu,
                      std::span<const double> nu) {
    double err = 0.0;
    vec<double> col(static_cast<std::size_t>(p.cols), 0.0);
    for (idx i = 0; i < p.rows; ++i) {
        double row = 0.0;
        for (idx j = 0; j < p.cols; ++j) {
            const double v = p.at(i, j);
            row += v;
            col[static_cast<std::size_t>(j)] += v;
        }
        err += std::abs(row - mu[static_cast<std::size_t>(i)]);
    }
    for (idx j = 0; j < p.cols; ++j)
        err += std::abs(col[static_cast<std::size_t>(j)] - nu[static_cast<std::size_t>(j)]);
    return err;
}

double logsumexp(const double* values, idx n) {
    double m = -std::numeric_limits<double>::infinity();
    for (idx i = 0; i < n; ++i) m = std::max(m, values[i]);
    if (std::isinf(m)) return m;
    double s = 0.0;
    for (idx i = 0; i < n; ++i) s += std::exp(values[i] - m);
    return m + std::log(s);
}

} // namespace

SinkhornResult sinkhorn(std::span<const double> cost, idx n, idx k, std::span<const double> mu,
                        std::span<const double> nu, double epsilon, int max_iter, double tol) {
    if (!(epsilon > 0.0)) throw ValidationError("sinkhorn epsilon must be positive");
    if (static_cast<idx>(cost.size()) != n * k) throw ValidationError("cost matrix size mismatch");
    if (static_cast<idx>(mu.size()) != n || static_cast<idx>(nu.size()) != k)
        throw ValidationError("marginal length mismatch");
    for (double c : cost)
        if (!std::isfinite(c)) throw ValidationError("non-finite cost entry");

    SinkhornResult res;
    res.coupling.rows = n;
    res.coupling.cols = k;
    res.coupling.data.assign(static_cast<std::size_t>(n * k), 0.0);

    const bool log_domain = epsilon <= 1e-2 * median_of(cost);
    const auto at = [&](idx i, idx j) { return cost[static_cast<std::size_t>(i * k + j)]; };

    if (!log_domain) {
        vec<double> kernel(static_cast<std::size_t>(n * k), 0.0);
        for (idx i = 0; i < n; ++i)
            for (idx j = 0; j < k; ++j)
                kernel[static_cast<std::size_t>(i * k + j)] = std::exp(-at(i, j) / epsilon);
        vec<double> u(static_cast<std::size_t>(n), 1.0);
        vec<double> v(static_cast<std::size_t>(k), 1.0);
        bool converged = false;
        int it = 0;
        for (; it < max_iter; ++it) {
            for (idx i = 0; i < n; ++i) {
                double s = 0.0;
                for (idx j = 0; j < k; ++j)
                    s += kernel[static_cast<std::size_t>(i * k + j)] * v[static_cast<std::size_t>(j)];
                u[static_cast<std::size_t>(i)] = s > 0.0 ? mu[static_cast<std::size_t>(i)] / s : 0.0;
            }
            for (idx j = 0; j < k; ++j) {
                double s = 0.0;
                for (idx i = 0; i < n; ++i)
                    s += kernel[static_cast<std::size_t>(i * k + j)] * u[static_cast<std::size_t>(i)];
                v[static_cast<std::size_t>(j)] = s > 0.0 ? nu[static_cast<std::size_t>(j)] / s : 0.0;
            }
            for (idx i = 0; i < n; ++i)
                for (idx j = 0; j < k; ++j)
                    res.coupling.at(i, j) = u[static_cast<std::size_t>(i)] *
                                            kernel[static_cast<std::size_t>(i * k + j)] *
                                            v[static_cast<std::size_t>(j)];
            if (marginal_error(res.coupling, mu, nu) < tol) {
                converged = true;
                ++it;
                break;
            }
        }
        res.coupling.converged = converged;
        res.iterations = it;
        return res;
    }

    // Log-domain scaling for small epsilon.
    vec<double> f(static_cast<std::size_t>(n), 0.0);
    vec<double> g(static_cast<std::size_t>(k), 0.0);
    vec<double> scratch(static_cast<std::size_t>(std::max(n, k)), 0.0);
    const auto neg_inf = -std::numeric_limits<double>::infinity();
    vec<double> log_mu(static_cast<std::size_t>(n), 0.0);
    vec<double> log_nu(static_cast<std::size_t>(k), 0.0);
    for (idx i = 0; i < n; ++i)
        log_mu[static_cast<std::size_t>(i)] =
            mu[static_cast<std::size_t>(i)] > 0.0 ? std::log(mu[static_cast<std::size_t>(i)]) : neg_inf;
    for (idx j = 0; j < k; ++j)
        log_nu[static_cast<std::size_t>(j)] =
            nu[static_cast<std::size_t>(j)] > 0.0 ? std::log(nu[static_cast<std::size_t>(j)]) : neg_inf;

    bool converged = false;
    int it = 0;
    for (; it < max_iter; ++it) {
        for (idx i = 0; i < n; ++i) {
            for (idx j = 0; j < k; ++j)
                scratch[static_cast<std::size_t>(j)] =
                    (g[static_cast<std::size_t>(j)] - at(i, j)) / epsilon;
            f[static_cast<std::size_t>(i)] =
                epsilon * (log_mu[static_cast<std::size_t>(i)] - logsumexp(scratch.data(), k));
        }
        for (idx j = 0; j < k; ++j) {
            for (idx i = 0; i < n; ++i)
                scratch[static_cast<std::size_t>(i)] =
                    (f[static_cast<std::size_t>(i)] - at(i, j)) / epsilon;
            g[static_cast<std::size_t>(j)] =
                epsilon * (log_nu[static_cast<std::size_t>(j)] - logsumexp(scratch.data(), n));
        }
        for (idx i = 0; i < n; ++i)
            for (idx j = 0; j < k; ++j) {
                const double e =
                    (f[static_cast<std::size_t>(i)] + g[static_cast<std::size_t>(j)] - at(i, j)) /
                    epsilon;
                res.coupling.at(i, j) = std::isinf(e) && e < 0 ? 0.0 : std::exp(e);
            }
        if (marginal_error(res.coupling, mu, nu) < tol) {
            converged = true;
            ++it;
            break;
        }
    }
    res.coupling.converged = converged;
    res.iterations = it;
    return res;
}

// ---------------------------------------------------------------------------
// Network simplex on the dense bipartite transportation graph.
// ---------------------------------------------------------------------------

namespace {

struct BasicCell {
    idx i = 0; // source row
    idx j = 0; // sink column
    double flow = 0.0;
};

class TransportSimplex {
public:
    TransportSimplex(std::span<const double> cost, idx n, idx k, std::span<const double> mu,
                     std::span<const double> nu)
        : cost_(cost), n_(n), k_(k) {
        supply_.assign(mu.begin(), mu.end());
        demand_.assign(nu.begin(), nu.end());
        const double total_a = std::accumulate(supply_.begin(), supply_.end(), 0.0);
        const double total_b = std::accumulate(demand_.begin(), demand_.end(), 0.0);
        if (std::abs(total_a - total_b) > 1e-9)
            throw ValidationError("unbalanced transport problem");
        if (total_b > 0.0) {
            const double fix = total_a / total_b;
            for (double& d : demand_) d *= fix;
        }
        scale_ = 1.0;
        for (double c : cost_) scale_ = std::max(scale_, std::abs(c));
    }

    ExactOtResult run() {
        northwest_corner();
        rebuild_tree();
        const idx arc_count = n_ * k_;
        const idx block = std::max<idx>(64, static_cast<idx>(std::sqrt(static_cast<double>(arc_count))));
        const double tol = 1e-12 * scale_;
        const long long max_pivots = 1000LL * static_cast<long long>(n_ + k_) + 100000LL;
        long long pivots = 0;
        idx cursor = 0;
        for (;;) {
            idx entering = -1;
            double best = -tol;
            idx scanned = 0;
            while (scanned < arc_count) {
                const idx stop = std::min<idx>(cursor + block, arc_count);
                for (idx a = cursor; a < stop; ++a) {
                    const idx i = a / k_;
                    const idx j = a % k_;
                    const double r = cost_[static_cast<std::size_t>(a)] -
                                     u_[static_cast<std::size_t>(i)] -
                                     v_[static_cast<std::size_t>(j)];
                    if (r < best) {
                        best = r;
                        entering = a;
                    }
                }
                scanned += stop - cursor;
                cursor = stop == arc_count ? 0 : stop;
                if (entering != -1) break;
            }
            if (entering == -1) break;
            pivot(entering / k_, entering % k_);
            if (++pivots > max_pivots)
                throw NumericalError("transport simplex exceeded pivot budget");
        }
        return extract();
    }

private:
    idx node_of_source(idx i) const { return i; }
    idx node_of_sink(idx j) const { return n_ + j; }

    void northwest_corner() {
        basic_.reserve(static_cast<std::size_t>(n_ + k_ - 1));
        idx i = 0;
        idx j = 0;
        double ra = supply_[0];
        double rb = demand_[0];
        const idx cells = n_ + k_ - 1;
        for (idx c = 0; c < cells; ++c) {
            const double take = std::max(0.0, std::min(ra, rb));
            basic_.push_back({i, j, take});
            ra -= take;
            rb -= take;
            if (c == cells - 1) break;
            if (ra <= 0.0 && i < n_ - 1) {
                ++i;
                ra = supply_[static_cast<std::size_t>(i)];
            } else if (j < k_ - 1) {
                ++j;
                rb = demand_[static_cast<std::size_t>(j)];
            } else {
                ++i;
                ra = supply_[static_cast<std::size_t>(i)];
            }
        }
        adjacency_.assign(static_cast<std::size_t>(n_ + k_), {});
        for (std::size_t c = 0; c < basic_.size(); ++c) {
            adjacency_[static_cast<std::size_t>(node_of_source(basic_[c].i))].push_back(
                static_cast<idx>(c));
            adjacency_[static_cast<std::size_t>(node_of_sink(basic_[c].j))].push_back(
                static_cast<idx>(c));
        }
    }

    // BFS from node 0 recomputes parents, depths and potentials; O(n + k).
    void rebuild_tree() {
        const idx nodes = n_ + k_;
        parent_.assign(static_cast<std::size_t>(nodes), -1);
        parent_cell_.assign(static_cast<std::size_t>(nodes), -1);
        depth_.assign(static_cast<std::size_t>(nodes), 0);
        u_.assign(static_cast<std::size_t>(n_), 0.0);
        v_.assign(static_cast<std::size_t>(k_), 0.0);
        queue_.clear();
        queue_.push_back(0);
        seen_.assign(static_cast<std::size_t>(nodes), 0);
        seen_[0] = 1;
        auto& queue = queue_;
        auto& seen = seen_;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const idx node = queue[head];
            for (idx cell : adjacency_[static_cast<std::size_t>(node)]) {
                const auto& bc = basic_[static_cast<std::size_t>(cell)];
                const idx other =
                    node < n_ ? node_of_sink(bc.j) : node_of_source(bc.i);
                if (seen[static_cast<std::size_t>(other)]) continue;
                seen[static_cast<std::size_t>(other)] = 1;
                parent_[static_cast<std::size_t>(other)] = node;
                parent_cell_[static_cast<std::size_t>(other)] = cell;
                depth_[static_cast<std::size_t>(other)] = depth_[static_cast<std::size_t>(node)] + 1;
                const double c = cost_[static_cast<std::size_t>(bc.i * k_ + bc.j)];
                if (other >= n_)
                    v_[static_cast<std::size_t>(bc.j)] = c - u_[static_cast<std::size_t>(bc.i)];
                else
                    u_[static_cast<std::size_t>(bc.i)] = c - v_[static_cast<std::size_t>(bc.j)];
                queue.push_back(other);
            }
        }
    }

    void pivot(idx ei, idx ej) {
        // Ordered cycle: the entering arc plus the tree path from source ei
        // to sink ej; odd positions along the path give up flow.
        path_cells_.clear();
        idx a = node_of_source(ei);
        idx b = node_of_sink(ej);
        up_a_.clear();
        up_b_.clear();
        while (depth_[static_cast<std::size_t>(a)] > depth_[static_cast<std::size_t>(b)]) {
            up_a_.push_back(parent_cell_[static_cast<std::size_t>(a)]);
            a = parent_[static_cast<std::size_t>(a)];
        }
        while (depth_[static_cast<std::size_t>(b)] > depth_[static_cast<std::size_t>(a)]) {
            up_b_.push_back(parent_cell_[static_cast<std::size_t>(b)]);
            b = parent_[static_cast<std::size_t>(b)];
        }
        while (a != b) {
            up_a_.push_back(parent_cell_[static_cast<std::size_t>(a)]);
            a = parent_[static_cast<std::size_t>(a)];
            up_b_.push_back(parent_cell_[static_cast<std::size_t>(b)]);
            b = parent_[static_cast<std::size_t>(b)];
        }
        path_cells_.insert(path_cells_.end(), up_a_.begin(), up_a_.end());
        path_cells_.insert(path_cells_.end(), up_b_.rbegin(), up_b_.rend());

        double theta = std::numeric_limits<double>::infinity();
        idx leaving_pos = -1;
        for (std::size_t p = 0; p < path_cells_.size(); ++p) {
            if (p % 2 == 0) { // odd 1-based position: decreasing flow
                const double flow = basic_[static_cast<std::size_t>(path_cells_[p])].flow;
                if (flow < theta) {
                    theta = flow;
                    leaving_pos = static_cast<idx>(p);
                }
            }
        }
        for (std::size_t p = 0; p < path_cells_.size(); ++p) {
            auto& bc = basic_[static_cast<std::size_t>(path_cells_[p])];
            bc.flow += (p % 2 == 0) ? -theta : theta;
            if (bc.flow < 0.0) bc.flow = 0.0;
        }

        const idx leaving_cell = path_cells_[static_cast<std::size_t>(leaving_pos)];
        auto& lc = basic_[static_cast<std::size_t>(leaving_cell)];
        detach(node_of_source(lc.i), leaving_cell);
        detach(node_of_sink(lc.j), leaving_cell);
        lc = {ei, ej, theta};
        adjacency_[static_cast<std::size_t>(node_of_source(ei))].push_back(leaving_cell);
        adjacency_[static_cast<std::size_t>(node_of_sink(ej))].push_back(leaving_cell);
        rebuild_tree();
    }

    void detach(idx node, idx cell) {
        auto& list = adjacency_[static_cast<std::size_t>(node)];
        for (std::size_t t = 0; t < list.size(); ++t) {
            if (list[t] == cell) {
                list[t] = list.back();
                list.pop_back();
                return;
            }
        }
    }

    ExactOtResult extract() const {
        ExactOtResult res;
        res.coupling.rows = n_;
        res.coupling.cols = k_;
        res.coupling.data.assign(static_cast<std::size_t>(n_ * k_), 0.0);
        double total = 0.0;
        for (const auto& bc : basic_) {
            if (bc.flow <= 0.0) continue;
            res.coupling.at(bc.i, bc.j) = bc.flow;
            total += bc.flow * cost_[static_cast<std::size_t>(bc.i * k_ + bc.j)];
        }
        res.cost = total;
        return res;
    }

    std::span<const double> cost_;
    idx n_;
    idx k_;
    vec<double> supply_;
    vec<double> demand_;
    double scale_ = 1.0;

    std::vector<BasicCell> basic_;
    std::vector<vec<idx>> adjacency_;
    vec<idx> parent_;
    vec<idx> parent_cell_;
    vec<idx> depth_;
    vec<double> u_;
    vec<double> v_;
    vec<idx> path_cells_;
    vec<idx> up_a_;
    vec<idx> up_b_;
    vec<idx> queue_;
    vec<char> seen_;
};

} // namespace

ExactOtResult exact_ot(std::span<const double> cost, idx n, idx k, std::span<const double> mu,
                       std::span<const double> nu) {
    if (static_cast<idx>(cost.size()) != n * k) throw ValidationError("cost matrix size mismatch");
    if (static_cast<idx>(mu.size()) != n || static_cast<idx>(nu.size()) != k)
        throw ValidationError("marginal length mismatch");
    for (double c : cost)
        if (!std::isfinite(c)) throw ValidationError("non-finite cost entry");
    for (double w : mu)
        if (!std::isfinite(w) || w < 0.0) throw ValidationError("invalid source mass");
    for (double w : nu)
        if (!std::isfinite(w) || w < 0.0) throw ValidationError("invalid target mass");
    TransportSimplex solver(cost, n, k, mu, nu);
    return solver.run();
}

ExactOtResult exact_ot_small(std::span<const double> cost, idx n, idx k,
                             std::span<const double> mu, std::span<const double> nu) {
    if (n * k > 10000)
        throw ValidationError("exact_ot_small is capped at 10^4 cells; got " +
                              std::to_string(n * k));
    return exact_ot(cost, n, k, mu, nu);
}

} // namespace qgw
