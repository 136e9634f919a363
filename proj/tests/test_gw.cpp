#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qgw/gw.hpp"
#include "qgw/mm_space.hpp"
#include "qgw/rng.hpp"

// Absolute-tolerance comparison; doctest's Approx is relative.
#define CHECK_ABS(a, b, tol) CHECK(std::abs((a) - (b)) <= (tol))

using namespace qgw;

namespace {

MmSpace random_cloud(Rng& rng, idx n, idx dim) {
    vec<double> coords(static_cast<std::size_t>(n * dim));
    for (auto& v : coords) v = rng.uniform() * 4.0;
    return MmSpace::from_points(std::move(coords), n, dim);
}

DiscreteCoupling diag_coupling(std::span<const double> mu) {
    DiscreteCoupling c;
    c.rows = c.cols = static_cast<idx>(mu.size());
    c.data.assign(mu.size() * mu.size(), 0.0);
    for (idx i = 0; i < c.rows; ++i) c.at(i, i) = mu[static_cast<std::size_t>(i)];
    return c;
}

} // namespace

TEST_CASE("hand-derived losses on the two-point pair") {
    const vec<double> dx{0, 1, 1, 0};
    const vec<double> dy{0, 2, 2, 0};
    const vec<double> mu{.5, .5};
    SUBCASE("diagonal coupling") {
        const DiscreteCoupling c = diag_coupling(mu);
        CHECK_ABS(gw_loss(dx, 2, dy, 2, c), 0.5, 1e-12);
        CHECK_ABS(gw_loss_brute(dx, 2, dy, 2, c), 0.5, 1e-12);
    }
    SUBCASE("product coupling") {
        const DiscreteCoupling c = DiscreteCoupling::product(mu, mu);
        CHECK_ABS(gw_loss(dx, 2, dy, 2, c), 1.5, 1e-12);
        CHECK_ABS(gw_loss_brute(dx, 2, dy, 2, c), 1.5, 1e-12);
    }
    SUBCASE("identical spaces under the identity coupling") {
        CHECK(gw_loss(dx, 2, dx, 2, diag_coupling(mu)) == 0.0);
    }
}

TEST_CASE("decomposed loss equals the brute-force sum") {
    Rng rng(64);
    for (int trial = 0; trial < 120; ++trial) {
        idx n = 2 + static_cast<idx>(rng.below(11));
        idx k = 2 + static_cast<idx>(rng.below(11));
        while (n * k > 200) {
            n = 2 + static_cast<idx>(rng.below(11));
            k = 2 + static_cast<idx>(rng.below(11));
        }
        const MmSpace x = random_cloud(rng, n, 2);
        const MmSpace y = random_cloud(rng, k, 2);
        const vec<double> dx = x.full_distance_matrix();
        const vec<double> dy = y.full_distance_matrix();
        const DiscreteCoupling c = DiscreteCoupling::product(x.measure(), y.measure());
        CHECK_ABS(gw_loss(dx, n, dy, k, c), gw_loss_brute(dx, n, dy, k, c), 1e-10);
    }
}

TEST_CASE("brute loss: zero-mass rows contribute nothing") {
    const vec<double> dx{0, 1, 1, 0};
    const vec<double> dy{0, 2, 2, 0};
    DiscreteCoupling c;
    c.rows = c.cols = 2;
    c.data = {1.0, 0.0, 0.0, 0.0}; // all mass on one pair
    CHECK(gw_loss_brute(dx, 2, dy, 2, c) == doctest::Approx(0.0));
}

TEST_CASE("loss homogeneity: scaling both metrics by c scales loss by c^2") {
    Rng rng(65);
    const MmSpace x = random_cloud(rng, 6, 2);
    const MmSpace y = random_cloud(rng, 5, 2);
    vec<double> dx = x.full_distance_matrix();
    vec<double> dy = y.full_distance_matrix();
    const DiscreteCoupling c = DiscreteCoupling::product(x.measure(), y.measure());
    const double base = gw_loss(dx, 6, dy, 5, c);
    const double factor = 3.5;
    for (auto& v : dx) v *= factor;
    for (auto& v : dy) v *= factor;
    CHECK(gw_loss(dx, 6, dy, 5, c) ==
          doctest::Approx(base * factor * factor).epsilon(1e-12));
}

TEST_CASE("loss is invariant under consistent permutations") {
    Rng rng(66);
    const idx n = 7, k = 6;
    const MmSpace x = random_cloud(rng, n, 2);
    const MmSpace y = random_cloud(rng, k, 2);
    const vec<double> dx = x.full_distance_matrix();
    const vec<double> dy = y.full_distance_matrix();
    const DiscreteCoupling c = DiscreteCoupling::product(x.measure(), y.measure());
    const double base = gw_loss(dx, n, dy, k, c);

    std::vector<idx> px(n), py(k);
    for (idx i = 0; i < n; ++i) px[static_cast<std::size_t>(i)] = i;
    for (idx j = 0; j < k; ++j) py[static_cast<std::size_t>(j)] = j;
    rng.shuffle(std::span<idx>(px.data(), px.size()));
    rng.shuffle(std::span<idx>(py.data(), py.size()));
    vec<double> dx2(dx.size()), dy2(dy.size());
    DiscreteCoupling c2 = c;
    for (idx i = 0; i < n; ++i)
        for (idx a = 0; a < n; ++a)
            dx2[static_cast<std::size_t>(i * n + a)] =
                dx[static_cast<std::size_t>(px[static_cast<std::size_t>(i)] * n +
                                            px[static_cast<std::size_t>(a)])];
    for (idx j = 0; j < k; ++j)
        for (idx b = 0; b < k; ++b)
            dy2[static_cast<std::size_t>(j * k + b)] =
                dy[static_cast<std::size_t>(py[static_cast<std::size_t>(j)] * k +
                                            py[static_cast<std::size_t>(b)])];
    for (idx i = 0; i < n; ++i)
        for (idx j = 0; j < k; ++j)
            c2.at(i, j) = c.at(px[static_cast<std::size_t>(i)], py[static_cast<std::size_t>(j)]);
    CHECK_ABS(gw_loss(dx2, n, dy2, k, c2), base, 1e-12);
}

TEST_CASE("solver: identical spaces from identity init stay at zero") {
    Rng rng(42);
    const MmSpace x = random_cloud(rng, 12, 3);
    const vec<double> dx = x.full_distance_matrix();
    GwConfig cfg;
    cfg.init = GwConfig::Init::identity_if_square;
    const GwSolveResult r = solve_gw(dx, 12, dx, 12, x.measure(), x.measure(), cfg);
    CHECK(r.loss == 0.0);
}

TEST_CASE("solver: two points against one point has a unique coupling") {
    const vec<double> dx{0, 1, 1, 0};
    const vec<double> dy{0};
    const vec<double> mu{.5, .5};
    const vec<double> nu{1.0};
    const GwSolveResult r = solve_gw(dx, 2, dy, 1, mu, nu);
    CHECK_ABS(r.loss, 0.5, 1e-12);
    CHECK(r.coupling.at(0, 0) == doctest::Approx(0.5));
    CHECK(r.coupling.at(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("solver never ends above the product coupling, trace non-increasing") {
    Rng rng(43);
    for (int trial = 0; trial < 25; ++trial) {
        const MmSpace x = random_cloud(rng, 5, 2);
        const MmSpace y = random_cloud(rng, 5, 2);
        const vec<double> dx = x.full_distance_matrix();
        const vec<double> dy = y.full_distance_matrix();
        const GwSolveResult r = solve_gw(dx, 5, dy, 5, x.measure(), y.measure());
        const DiscreteCoupling prod = DiscreteCoupling::product(x.measure(), y.measure());
        CHECK(r.loss <= gw_loss(dx, 5, dy, 5, prod) + 1e-12);
        for (std::size_t i = 1; i < r.trace.size(); ++i)
            CHECK(r.trace[i] <= r.trace[i - 1] + 1e-12);
    }
}

TEST_CASE("fused solver degeneracies") {
    Rng rng(44);
    const MmSpace x = random_cloud(rng, 6, 2);
    const MmSpace y = random_cloud(rng, 7, 2);
    const vec<double> dx = x.full_distance_matrix();
    const vec<double> dy = y.full_distance_matrix();
    vec<double> fc(static_cast<std::size_t>(6 * 7));
    for (auto& v : fc) v = rng.uniform();

    SUBCASE("alpha = 0 reproduces the metric solver bit for bit") {
        const GwSolveResult plain = solve_gw(dx, 6, dy, 7, x.measure(), y.measure());
        const GwSolveResult fused =
            solve_fgw(dx, 6, dy, 7, fc, x.measure(), y.measure(), 0.0);
        CHECK(fused.loss == plain.loss);
        CHECK(fused.coupling.data == plain.coupling.data);
    }
    SUBCASE("alpha = 1 is one linear transport solve") {
        const GwSolveResult fused =
            solve_fgw(dx, 6, dy, 7, fc, x.measure(), y.measure(), 1.0);
        const ExactOtResult lp = exact_ot_small(fc, 6, 7, x.measure(), y.measure());
        for (idx c = 0; c < 42; ++c)
            CHECK_ABS(fused.coupling.data[static_cast<std::size_t>(c)], lp.coupling.data[static_cast<std::size_t>(c)], 1e-10);
        CHECK_ABS(fused.loss, lp.cost, 1e-10);
    }
}

TEST_CASE("fused solver matches a brute-force scan of the 2x2 polytope") {
    // Metric structure prefers the identity pairing, features prefer the
    // swap; couplings with uniform marginals form the one-parameter family
    // [[s, .5-s], [.5-s, s]].
    const vec<double> dx{0, 1, 1, 0};
    const vec<double> dy{0, 1.4, 1.4, 0};
    const vec<double> fc{1.0, 0.0, 0.0, 1.0}; // zero cost on the swap
    const vec<double> mu{.5, .5};

    auto fgw_of = [&](double s, double alpha) {
        DiscreteCoupling c;
        c.rows = c.cols = 2;
        c.data = {s, .5 - s, .5 - s, s};
        double feat = 0.0;
        for (idx t = 0; t < 4; ++t)
            feat += fc[static_cast<std::size_t>(t)] * c.data[static_cast<std::size_t>(t)];
        return (1.0 - alpha) * gw_loss_brute(dx, 2, dy, 2, c) + alpha * feat;
    };

    // alpha = 0 makes the product coupling a stationary saddle of the
    // descent (constant gradient), so the sweep starts where the feature
    // term breaks the tie.
    double prev_loss = 1e300;
    for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        double brute_min = 1e300;
        for (int grid = 0; grid <= 5000; ++grid) {
            const double s = 0.5 * grid / 5000.0;
            brute_min = std::min(brute_min, fgw_of(s, alpha));
        }
        const GwSolveResult r = solve_fgw(dx, 2, dy, 2, fc, mu, mu, alpha);
        CHECK_ABS(r.loss, brute_min, 1e-6);
        // the swap coupling wins for every alpha here, so the blended loss
        // interpolates monotonically down toward the pure feature loss 0
        CHECK(r.loss <= prev_loss + 1e-9);
        prev_loss = r.loss;
    }
}

TEST_CASE("entropic inner option keeps marginals and descends") {
    Rng rng(45);
    const MmSpace x = random_cloud(rng, 8, 2);
    const MmSpace y = random_cloud(rng, 8, 2);
    const vec<double> dx = x.full_distance_matrix();
    const vec<double> dy = y.full_distance_matrix();
    GwConfig cfg;
    cfg.inner = GwConfig::Inner::entropic;
    // moderate epsilon: the spec default (1e-2 x median) trades marginal
    // accuracy for sharpness and typically returns flagged iterates
    cfg.epsilon = 10.0;
    cfg.sinkhorn_tol = 1e-9;
    cfg.sinkhorn_max_iter = 20000;
    const GwSolveResult r = solve_gw(dx, 8, dy, 8, x.measure(), y.measure(), cfg);
    REQUIRE(r.inner_converged);
    const DiscreteCoupling prod = DiscreteCoupling::product(x.measure(), y.measure());
    CHECK(r.loss <= gw_loss(dx, 8, dy, 8, prod) + 1e-9);
    const vec<double> rows = r.coupling.row_marginal();
    for (idx i = 0; i < 8; ++i)
        CHECK_ABS(rows[static_cast<std::size_t>(i)], x.measure()[static_cast<std::size_t>(i)], 1e-8);
}

TEST_CASE("identity init validates shapes and measures") {
    const vec<double> dx{0, 1, 1, 0};
    const vec<double> dy{0};
    GwConfig cfg;
    cfg.init = GwConfig::Init::identity_if_square;
    const vec<double> mu{.5, .5};
    const vec<double> nu{1.0};
    CHECK_THROWS_AS(static_cast<void>(solve_gw(dx, 2, dy, 1, mu, nu, cfg)), ValidationError);
}
