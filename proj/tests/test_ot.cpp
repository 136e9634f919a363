#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "qgw/ot.hpp"
#include "qgw/rng.hpp"

// Absolute-tolerance comparison; doctest's Approx is relative.
#define CHECK_ABS(a, b, tol) CHECK(std::abs((a) - (b)) <= (tol))

using namespace qgw;

namespace {

Atoms1D atoms(std::initializer_list<double> pos, std::initializer_list<double> mass) {
    Atoms1D a;
    a.positions.assign(pos.begin(), pos.end());
    a.masses.assign(mass.begin(), mass.end());
    return a;
}

Atoms1D random_atoms(Rng& rng, idx count) {
    Atoms1D a;
    double total = 0.0;
    for (idx i = 0; i < count; ++i) {
        a.positions.push_back(rng.uniform() * 10.0 - 5.0);
        const double m = rng.uniform() + 0.01;
        a.masses.push_back(m);
        total += m;
    }
    for (auto& m : a.masses) m /= total;
    return a;
}

vec<double> quadratic_cost(const Atoms1D& a, const Atoms1D& b) {
    const idx n = static_cast<idx>(a.positions.size());
    const idx k = static_cast<idx>(b.positions.size());
    vec<double> cost(static_cast<std::size_t>(n * k), 0.0);
    for (idx i = 0; i < n; ++i)
        for (idx j = 0; j < k; ++j) {
            const double d = a.positions[static_cast<std::size_t>(i)] -
                             b.positions[static_cast<std::size_t>(j)];
            cost[static_cast<std::size_t>(i * k + j)] = d * d;
        }
    return cost;
}

} // namespace

TEST_CASE("1D transport: identical atoms map to themselves at zero cost") {
    const Atoms1D a = atoms({0, 1}, {.5, .5});
    const Plan1DResult r = solve_1d_ot(a, a);
    CHECK(r.cost == doctest::Approx(0.0));
    REQUIRE(r.plan.entries.size() == 2);
    CHECK(r.plan.mass_at(0, 0) == doctest::Approx(0.5));
    CHECK(r.plan.mass_at(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("1D transport: two sources into one target") {
    const Plan1DResult r = solve_1d_ot(atoms({0, 2}, {.5, .5}), atoms({1}, {1.0}));
    CHECK(r.cost == doctest::Approx(1.0));
    CHECK(r.plan.mass_at(0, 0) == doctest::Approx(0.5));
    CHECK(r.plan.mass_at(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("1D transport: northwest sweep worked example") {
    const Plan1DResult r = solve_1d_ot(atoms({0, 1}, {.3, .7}), atoms({0, 1}, {.6, .4}));
    CHECK(r.cost == doctest::Approx(0.3));
    REQUIRE(r.plan.entries.size() == 3);
    CHECK(r.plan.mass_at(0, 0) == doctest::Approx(0.3));
    CHECK(r.plan.mass_at(1, 0) == doctest::Approx(0.3));
    CHECK(r.plan.mass_at(1, 1) == doctest::Approx(0.4));
}

TEST_CASE("1D transport rejects unbalanced masses") {
    CHECK_THROWS_WITH_AS(static_cast<void>(solve_1d_ot(atoms({0}, {1.0}), atoms({0}, {0.5}))),
                         doctest::Contains("unbalanced"), ValidationError);
}

TEST_CASE("1D plans are monotone with bounded support and exact marginals") {
    Rng rng(100);
    for (int trial = 0; trial < 150; ++trial) {
        const Atoms1D a = random_atoms(rng, 1 + static_cast<idx>(rng.below(8)));
        const Atoms1D b = random_atoms(rng, 1 + static_cast<idx>(rng.below(8)));
        const Plan1DResult r = solve_1d_ot(a, b);
        const idx ka = static_cast<idx>(a.positions.size());
        const idx kb = static_cast<idx>(b.positions.size());
        CHECK(static_cast<idx>(r.plan.entries.size()) <= ka + kb - 1);
        for (const auto& e : r.plan.entries) CHECK(e.mass > 0.0);
        // no crossing: if both pairs carry mass and pos_a strictly increases,
        // pos_b must not decrease
        for (const auto& e1 : r.plan.entries)
            for (const auto& e2 : r.plan.entries)
                if (a.positions[static_cast<std::size_t>(e1.i)] <
                    a.positions[static_cast<std::size_t>(e2.i)])
                    CHECK(b.positions[static_cast<std::size_t>(e1.j)] <=
                          b.positions[static_cast<std::size_t>(e2.j)] + 1e-15);
        const vec<double> rows = r.plan.row_sums(ka);
        const vec<double> cols = r.plan.col_sums(kb);
        for (idx i = 0; i < ka; ++i)
            CHECK_ABS(rows[static_cast<std::size_t>(i)], a.masses[static_cast<std::size_t>(i)], 1e-10);
        for (idx j = 0; j < kb; ++j)
            CHECK_ABS(cols[static_cast<std::size_t>(j)], b.masses[static_cast<std::size_t>(j)], 1e-10);
        double total = 0.0;
        for (const auto& e : r.plan.entries) total += e.mass;
        CHECK_ABS(total, 1.0, 1e-10);
    }
}

TEST_CASE("1D cost equals the exact solver on random instances") {
    Rng rng(2024);
    for (int trial = 0; trial < 150; ++trial) {
        const Atoms1D a = random_atoms(rng, 1 + static_cast<idx>(rng.below(8)));
        const Atoms1D b = random_atoms(rng, 1 + static_cast<idx>(rng.below(8)));
        const Plan1DResult fast = solve_1d_ot(a, b);
        const ExactOtResult lp =
            exact_ot_small(quadratic_cost(a, b), static_cast<idx>(a.positions.size()),
                           static_cast<idx>(b.positions.size()), a.masses, b.masses);
        CHECK_ABS(fast.cost, lp.cost, 1e-9);
    }
}

TEST_CASE("sinkhorn basics") {
    SUBCASE("1x1 problem") {
        const vec<double> cost{0.7};
        const vec<double> one{1.0};
        const SinkhornResult r = sinkhorn(cost, 1, 1, one, one, 0.5);
        CHECK(r.coupling.at(0, 0) == doctest::Approx(1.0));
        CHECK(r.coupling.converged);
    }
    SUBCASE("zero cost maximizes entropy") {
        const vec<double> cost{0, 0, 0, 0};
        const vec<double> mu{.5, .5};
        const SinkhornResult r = sinkhorn(cost, 2, 2, mu, mu, 0.3, 2000, 1e-12);
        for (idx c = 0; c < 4; ++c)
            CHECK(r.coupling.data[static_cast<std::size_t>(c)] == doctest::Approx(0.25));
    }
    SUBCASE("small epsilon concentrates on the diagonal, entropic cost to zero") {
        const vec<double> cost{0, 1, 1, 0};
        const vec<double> mu{.5, .5};
        const SinkhornResult r = sinkhorn(cost, 2, 2, mu, mu, 1e-4, 5000, 1e-10);
        CHECK(r.coupling.at(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
        CHECK_ABS(r.coupling.at(0, 1), 0.0, 1e-6);
        double entropic_cost = 0.0;
        for (idx c = 0; c < 4; ++c)
            entropic_cost += cost[static_cast<std::size_t>(c)] *
                             r.coupling.data[static_cast<std::size_t>(c)];
        const ExactOtResult lp = exact_ot_small(cost, 2, 2, mu, mu);
        CHECK(lp.cost == doctest::Approx(0.0));
        CHECK_ABS(entropic_cost, lp.cost, 1e-5);
    }
    SUBCASE("marginals hold whenever the converged flag is set") {
        Rng rng(8);
        for (int t = 0; t < 20; ++t) {
            const idx n = 2 + static_cast<idx>(rng.below(5));
            const idx k = 2 + static_cast<idx>(rng.below(5));
            vec<double> cost(static_cast<std::size_t>(n * k));
            for (auto& v : cost) v = rng.uniform();
            Atoms1D a = random_atoms(rng, n), b = random_atoms(rng, k);
            const double tol = 1e-8;
            const SinkhornResult r = sinkhorn(cost, n, k, a.masses, b.masses, 0.05, 4000, tol);
            if (!r.coupling.converged) continue;
            const vec<double> rows = r.coupling.row_marginal();
            const vec<double> cols = r.coupling.col_marginal();
            double err = 0.0;
            for (idx i = 0; i < n; ++i)
                err += std::abs(rows[static_cast<std::size_t>(i)] -
                                a.masses[static_cast<std::size_t>(i)]);
            for (idx j = 0; j < k; ++j)
                err += std::abs(cols[static_cast<std::size_t>(j)] -
                                b.masses[static_cast<std::size_t>(j)]);
            CHECK(err < tol);
        }
    }
    SUBCASE("non-convergence is flagged, best iterate returned") {
        const vec<double> cost{0, 5, 5, 0};
        const vec<double> mu{.9, .1};
        const vec<double> nu{.2, .8};
        const SinkhornResult r = sinkhorn(cost, 2, 2, mu, nu, 1e-3, 1, 1e-14);
        CHECK_FALSE(r.coupling.converged);
        CHECK(r.coupling.rows == 2);
    }
}

TEST_CASE("exact transport hand cases") {
    SUBCASE("diagonal-zero cost keeps the identity support") {
        const vec<double> cost{0, 1, 1, 0};
        const vec<double> mu{.5, .5};
        const ExactOtResult r = exact_ot_small(cost, 2, 2, mu, mu);
        CHECK(r.cost == doctest::Approx(0.0));
        CHECK(r.coupling.at(0, 0) == doctest::Approx(0.5));
        CHECK(r.coupling.at(1, 1) == doctest::Approx(0.5));
    }
    SUBCASE("2x2 basic-solution enumeration case") {
        const vec<double> cost{0, 2, 2, 0};
        const vec<double> mu{.3, .7};
        const vec<double> nu{.6, .4};
        const ExactOtResult r = exact_ot_small(cost, 2, 2, mu, nu);
        CHECK(r.cost == doctest::Approx(0.6));
        CHECK(r.coupling.at(0, 0) == doctest::Approx(0.3));
        CHECK(r.coupling.at(0, 1) == doctest::Approx(0.0));
        CHECK(r.coupling.at(1, 0) == doctest::Approx(0.3));
        CHECK(r.coupling.at(1, 1) == doctest::Approx(0.4));
    }
    SUBCASE("size cap") {
        vec<double> cost(20000, 0.0);
        vec<double> mu(100, 0.01);
        vec<double> nu(200, 0.005);
        CHECK_THROWS_AS(static_cast<void>(exact_ot_small(cost, 100, 200, mu, nu)),
                        ValidationError);
    }
}

TEST_CASE("exact solver returns vertex solutions with nonnegative mass") {
    Rng rng(2030);
    for (int trial = 0; trial < 60; ++trial) {
        const idx n = 1 + static_cast<idx>(rng.below(12));
        const idx k = 1 + static_cast<idx>(rng.below(12));
        vec<double> cost(static_cast<std::size_t>(n * k));
        for (auto& v : cost) v = rng.uniform() * 4.0;
        const Atoms1D a = random_atoms(rng, n);
        const Atoms1D b = random_atoms(rng, k);
        const ExactOtResult r = exact_ot(cost, n, k, a.masses, b.masses);
        idx nnz = 0;
        double total = 0.0;
        for (double v : r.coupling.data) {
            CHECK(v >= 0.0);
            if (v > 0.0) ++nnz;
            total += v;
        }
        CHECK(nnz <= n + k - 1);
        CHECK_ABS(total, 1.0, 1e-10);
        const vec<double> rows = r.coupling.row_marginal();
        for (idx i = 0; i < n; ++i)
            CHECK_ABS(rows[static_cast<std::size_t>(i)], a.masses[static_cast<std::size_t>(i)], 1e-10);
    }
}
