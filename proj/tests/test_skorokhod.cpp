#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "dmrg/errors.hpp"
#include "dmrg/skorokhod.hpp"

using namespace dmrg;

namespace {

double sup_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

GridCurve random_walk(const TimeGrid& g, std::mt19937_64& rng, double lo, double hi, double step) {
    std::uniform_real_distribution<double> U(-step, step);
    std::vector<double> v(static_cast<std::size_t>(g.size()));
    v[0] = 0.5 * (lo + hi) * 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) v[i] = std::clamp(v[i - 1] + U(rng), lo, hi);
    return GridCurve(g, v);
}

// Clip recursion: the grid version of the reflected path.
std::vector<double> forward_clip(const GridCurve& xbar, const Band& band) {
    std::vector<double> x(static_cast<std::size_t>(xbar.size()));
    x[0] = xbar[0];
    for (int i = 1; i < xbar.size(); ++i)
        x[static_cast<std::size_t>(i)] = std::clamp(x[static_cast<std::size_t>(i - 1)] + xbar[i] - xbar[i - 1],
                                                    band.lower()[i], band.upper()[i]);
    return x;
}

std::vector<double> backward_clip(const GridCurve& xbar, double a, const Band& band) {
    const int n = xbar.size() - 1;
    std::vector<double> x(static_cast<std::size_t>(n) + 1);
    x[static_cast<std::size_t>(n)] = a;
    for (int i = n - 1; i >= 0; --i)
        x[static_cast<std::size_t>(i)] = std::clamp(x[static_cast<std::size_t>(i + 1)] + xbar[i + 1] - xbar[i],
                                                    band.lower()[i], band.upper()[i]);
    return x;
}

}  // namespace

TEST_CASE("forward ramp saturates at upper barrier") {
    TimeGrid g = make_grid(2.0, 40);
    GridCurve xbar = GridCurve::sample(g, [](double t) { return t; });
    Band band(GridCurve::constant(g, 0.0), GridCurve::constant(g, 1.0));
    auto sol = forward_skorokhod(xbar, band);
    for (int i = 0; i < g.size(); ++i) {
        const double t = g.node(i);
        CHECK(sol.k.value(i) == doctest::Approx(-std::max(t - 1.0, 0.0)).scale(1.0).epsilon(1e-12));
        CHECK(sol.x[i] == doctest::Approx(std::min(t, 1.0)).scale(1.0).epsilon(1e-12));
    }
    CHECK(check_minimality(sol, band, 1e-10).passed());
    auto direct = forward_skorokhod_direct(xbar, band);
    CHECK(sup_diff(direct.k.values(), sol.k.values()) <= 1e-12);
    auto oracle = oracle_skorokhod(xbar, band);
    CHECK(sup_diff(oracle.solution.k.values(), sol.k.values()) <= 1e-9);
}

TEST_CASE("interior input needs no regulator") {
    TimeGrid g = make_grid(1.0, 16);
    GridCurve xbar = GridCurve::sample(g, [](double t) { return 0.3 * std::sin(6.0 * t); });
    Band band(GridCurve::constant(g, -1.0), GridCurve::constant(g, 1.0));
    auto sol = forward_skorokhod(xbar, band);
    CHECK(sol.k.total_variation() == 0.0);
    auto oracle = oracle_skorokhod(xbar, band);
    CHECK(oracle.sweeps == 1);
    CHECK(oracle.solution.k.total_variation() == 0.0);
    auto back = backward_skorokhod(xbar, 0.2, band);
    CHECK(back.k.total_variation() == 0.0);
}

TEST_CASE("forward start outside band is rejected") {
    TimeGrid g = make_grid(1.0, 4);
    Band band(GridCurve::constant(g, 0.0), GridCurve::constant(g, 1.0));
    CHECK_THROWS_AS(forward_skorokhod(GridCurve::constant(g, 2.0), band), InvalidInput);
    CHECK_THROWS_AS(oracle_skorokhod(GridCurve::constant(g, -1.0), band), InvalidInput);
    CHECK_THROWS_AS(backward_skorokhod(GridCurve::constant(g, 0.0), 1.5, band), InvalidInput);
}

TEST_CASE("single step grid") {
    TimeGrid g = make_grid(1.0, 1);
    GridCurve xbar(g, {0.0, 3.0});
    Band band(GridCurve::constant(g, -1.0), GridCurve::constant(g, 1.0));
    auto sol = forward_skorokhod(xbar, band);
    CHECK(sol.x[1] == doctest::Approx(1.0));
    CHECK(sol.k.value(1) == doctest::Approx(-2.0));
    auto back = backward_skorokhod(xbar, 0.0, band);
    CHECK(back.x[0] == doctest::Approx(1.0));
}

TEST_CASE("random forward instances agree with oracle and clip recursion") {
    std::mt19937_64 rng(2024);
    TimeGrid g = make_grid(1.0, 32);
    Band band(GridCurve::constant(g, -1.0), GridCurve::constant(g, 1.0));
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
        GridCurve xbar = random_walk(g, rng, -2.0, 2.0, 0.8);
        auto sol = forward_skorokhod(xbar, band);
        auto direct = forward_skorokhod_direct(xbar, band);
        auto oracle = oracle_skorokhod(xbar, band);
        CHECK(sup_diff(sol.k.values(), direct.k.values()) <= 1e-12);
        CHECK(sup_diff(sol.k.values(), oracle.solution.k.values()) <= 1e-9);
        CHECK(sup_diff(sol.x.values(), forward_clip(xbar, band)) <= 1e-12);
        const bool a = check_minimality(sol, band, 1e-10).passed();
        const bool b = check_minimality(oracle.solution, band, 1e-10).passed();
        agree += (a == b && a);
    }
    CHECK(agree == 100);
}

TEST_CASE("random time-dependent barriers") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    TimeGrid g = make_grid(2.0, 48);
    for (int trial = 0; trial < 60; ++trial) {
        const double p = U(rng), q = U(rng);
        GridCurve l = GridCurve::sample(g, [&](double t) { return -0.5 + 0.4 * std::sin(3.0 * t + p); });
        GridCurve u = GridCurve::sample(g, [&](double t) { return 0.4 + 0.3 * std::cos(2.0 * t + q); });
        Band band(l, u);
        GridCurve xbar = random_walk(g, rng, -3.0, 3.0, 0.7);
        std::vector<double> xv(xbar.values().begin(), xbar.values().end());
        xv[0] = std::clamp(xv[0], l[0], u[0]);
        xbar = GridCurve(g, xv);
        auto sol = forward_skorokhod(xbar, band);
        CHECK(sup_diff(sol.k.values(), forward_skorokhod_direct(xbar, band).k.values()) <= 1e-12);
        CHECK(sup_diff(sol.k.values(), oracle_skorokhod(xbar, band).solution.k.values()) <= 1e-9);
        CHECK(check_minimality(sol, band, 1e-10).passed());

        const double a = std::clamp(U(rng), l[g.steps()], u[g.steps()]);
        auto back = backward_skorokhod(xbar, a, band);
        auto back_direct = backward_skorokhod_direct(xbar, a, band);
        auto back_oracle = oracle_backward_skorokhod(xbar, a, band);
        CHECK(sup_diff(back.x.values(), back_direct.x.values()) <= 1e-12);
        CHECK(sup_diff(back.x.values(), back_oracle.solution.x.values()) <= 1e-9);
        CHECK(sup_diff(back.x.values(), backward_clip(xbar, a, band)) <= 1e-12);
        CHECK(check_minimality(back, band, 1e-10).passed());
    }
}

TEST_CASE("idempotence of the forward map") {
    std::mt19937_64 rng(5);
    TimeGrid g = make_grid(1.0, 32);
    Band band(GridCurve::constant(g, -1.0), GridCurve::constant(g, 1.0));
    for (int trial = 0; trial < 30; ++trial) {
        auto sol = forward_skorokhod(random_walk(g, rng, -2.0, 2.0, 0.8), band);
        auto again = forward_skorokhod(sol.x, band);
        CHECK(again.k.total_variation() <= 1e-10);
    }
}

TEST_CASE("raising the upper barrier never adds upward push") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 0.5);
    TimeGrid g = make_grid(1.0, 32);
    for (int trial = 0; trial < 50; ++trial) {
        GridCurve xbar = random_walk(g, rng, -2.0, 2.0, 0.8);
        GridCurve l = GridCurve::constant(g, -1.0);
        GridCurve u = GridCurve::constant(g, 1.0);
        std::vector<double> raised(static_cast<std::size_t>(g.size()));
        for (auto& v : raised) v = 1.0 + U(rng);
        auto lo = forward_skorokhod(xbar, Band(l, u));
        auto hi = forward_skorokhod(xbar, Band(l, GridCurve(g, raised)));
        double up_lo = 0.0, up_hi = 0.0;
        for (int i = 1; i < g.size(); ++i) {
            up_lo += std::max(lo.k.increment(i), 0.0);
            up_hi += std::max(hi.k.increment(i), 0.0);
        }
        CHECK(up_hi <= up_lo + 1e-10);
    }
}

TEST_CASE("backward push from a falling lower barrier") {
    TimeGrid g = make_grid(1.0, 20);
    GridCurve xbar = GridCurve::constant(g, 0.0);
    Band band(GridCurve::sample(g, [](double t) { return 1.0 - t; }), GridCurve::constant(g, 2.0));
    auto sol = backward_skorokhod(xbar, 0.0, band);
    for (int i = 0; i < g.size(); ++i) {
        const double t = g.node(i);
        CHECK(sol.k.value(g.steps()) - sol.k.value(i) == doctest::Approx(1.0 - t).scale(1.0).epsilon(1e-12));
        CHECK(sol.x[i] == doctest::Approx(1.0 - t).scale(1.0).epsilon(1e-12));
    }
    CHECK(check_minimality(sol, band, 1e-10).passed());
}

TEST_CASE("backward narrow band with falling input") {
    TimeGrid g = make_grid(1.0, 40);
    GridCurve xbar = GridCurve::sample(g, [](double t) { return -t; });
    Band band(GridCurve::constant(g, -0.25), GridCurve::constant(g, 0.25));
    auto sol = backward_skorokhod(xbar, 0.0, band);
    auto oracle = oracle_backward_skorokhod(xbar, 0.0, band);
    CHECK(sup_diff(sol.x.values(), oracle.solution.x.values()) <= 1e-9);
    CHECK(check_minimality(sol, band, 1e-10).passed());
    // x_t = -(1 - t) clipped at -0.25 from below
    for (int i = 0; i < g.size(); ++i) CHECK(sol.x[i] == doctest::Approx(std::max(-(1.0 - g.node(i)), -0.25)));
}

TEST_CASE("backward shift on raw arrays matches the curve map") {
    std::mt19937_64 rng(3);
    TimeGrid g = make_grid(1.0, 24);
    Band band(GridCurve::constant(g, -0.5), GridCurve::constant(g, 0.7));
    for (int trial = 0; trial < 20; ++trial) {
        GridCurve xbar = random_walk(g, rng, -2.0, 2.0, 0.6);
        auto sol = backward_skorokhod(xbar, 0.1, band);
        auto shift = backward_shift(xbar.values(), 0.1, band.lower().values(), band.upper().values());
        for (int i = 0; i < g.size(); ++i)
            CHECK(shift[static_cast<std::size_t>(i)] ==
                  doctest::Approx(sol.k.value(g.steps()) - sol.k.value(i)).scale(1.0).epsilon(1e-12));
    }
}

TEST_CASE("cadlag input uses left limits at the horizon") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    TimeGrid g = make_grid(1.0, 12);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> xv(13), lv(13), uv(13);
        for (int i = 0; i <= 12; ++i) {
            xv[static_cast<std::size_t>(i)] = 2.0 * U(rng);
            lv[static_cast<std::size_t>(i)] = -0.6 + 0.3 * U(rng);
            uv[static_cast<std::size_t>(i)] = 0.6 + 0.3 * U(rng);
        }
        GridCurve xbar(g, xv, Regularity::cadlag);
        Band band(GridCurve(g, lv, Regularity::cadlag), GridCurve(g, uv, Regularity::cadlag));
        const double a = std::clamp(U(rng), lv[12], uv[12]);
        auto sol = backward_skorokhod(xbar, a, band);
        auto direct = backward_skorokhod_direct(xbar, a, band);
        CHECK(sup_diff(sol.x.values(), direct.x.values()) <= 1e-12);
        // step-function clip: x on [t_i, t_{i+1}) is clamp(x_{i+1-} ...) at node values
        std::vector<double> ref(13);
        ref[12] = a;
        double next = std::clamp(a + xv[12] - xv[11], lv[11], uv[11]);
        ref[11] = next;
        for (int i = 10; i >= 0; --i) {
            next = std::clamp(next + xv[static_cast<std::size_t>(i + 1)] - xv[static_cast<std::size_t>(i)],
                              lv[static_cast<std::size_t>(i)], uv[static_cast<std::size_t>(i)]);
            ref[static_cast<std::size_t>(i)] = next;
        }
        CHECK(sup_diff(sol.x.values(), ref) <= 1e-12);
        CHECK(check_minimality(sol, band, 1e-10).passed());
    }
}

TEST_CASE("minimality checker flags a push at the wrong barrier") {
    TimeGrid g = make_grid(1.0, 2);
    Band band(GridCurve::constant(g, 0.0), GridCurve::constant(g, 1.0));
    // x sits at u and k pushes up
    SkorokhodSolution bad{GridCurve(g, {0.5, 0.5, 0.5}), GridCurve(g, {0.5, 1.0, 1.0}),
                          BVPath(g, {0.5, 0.0}), Direction::forward, 0.0};
    auto rep = check_minimality(bad, band, 1e-10);
    CHECK_FALSE(rep.minimality_ok());
    CHECK(rep.sign_violation > 0.4);
    CHECK(rep.lower_sum > 0.4);
}

TEST_CASE("oracle iteration count grows as the band narrows") {
    TimeGrid g = make_grid(1.0, 64);
    GridCurve xbar = GridCurve::sample(g, [](double t) { return 0.5 * std::sin(40.0 * t); });
    Band wide(GridCurve::constant(g, -0.2), GridCurve::constant(g, 0.2));
    Band narrow(GridCurve::constant(g, -5e-4), GridCurve::constant(g, 5e-4));
    auto w = oracle_skorokhod(xbar, wide);
    auto n = oracle_skorokhod(xbar, narrow);
    CHECK(n.sweeps >= w.sweeps);
    CHECK(sup_diff(n.solution.k.values(), forward_skorokhod(xbar, narrow).k.values()) <= 1e-9);
    CHECK_THROWS_AS(oracle_skorokhod(xbar, narrow, 1), ConvergenceError);
}
