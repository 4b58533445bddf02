#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "dmrg/errors.hpp"
#include "dmrg/gexpectation.hpp"

using namespace dmrg;

namespace {

GEngine desk_engine(double lo, double hi, int m = 401, int n_t = 20) {
    VolatilityBand band(lo, hi);
    return GEngine(band, SpatialGrid(16.0, m), make_grid(1.0, n_t));
}

// Random bounded Lipschitz payoff: a*tanh(b x + c) + d*sin(e x).
struct RandomPayoff {
    double a, b, c, d, e;
    double operator()(double x) const { return a * std::tanh(b * x + c) + d * std::sin(e * x); }
};

RandomPayoff draw(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    return {U(rng), 1.5 * U(rng), U(rng), 0.5 * U(rng), 2.0 * U(rng)};
}

}  // namespace

TEST_CASE("g function branches") {
    VolatilityBand band(1.0, 2.0);
    CHECK(g_function(0.0, band) == 0.0);
    CHECK(g_function(2.0, band) == 4.0);
    CHECK(g_function(-2.0, band) == -1.0);
    CHECK_THROWS_AS(VolatilityBand(0.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(VolatilityBand(2.0, 1.0), InvalidInput);
}

TEST_CASE("spatial grid keeps the origin on a node") {
    SpatialGrid g(16.0, 401);
    CHECK(g.x(g.center()) == 0.0);
    CHECK(g.dx() == doctest::Approx(0.08));
    CHECK_THROWS_AS(SpatialGrid(1.0, 400), InvalidInput);
    CHECK_THROWS_AS(SpatialGrid(1.0, 1), InvalidInput);
}

TEST_CASE("substeps obey the CFL bound") {
    GEngine e = desk_engine(1.0, 2.0);
    CHECK(e.dtau() <= 0.45 * 0.08 * 0.08 / 4.0 + 1e-15);
}

TEST_CASE("constants are preserved") {
    GEngine e = desk_engine(1.0, 2.0);
    StateField five = StateField::constant(e.space(), 1.0, 5.0);
    CHECK(e.gexp(five) == 5.0);
    CHECK(e.solve_gheat(five, 0.5).values()[3] == 5.0);
}

TEST_CASE("closed forms for convex and concave payoffs") {
    GEngine e = desk_engine(1.0, 2.0);
    const SpatialGrid& s = e.space();
    CHECK(std::abs(e.gexp(StateField::sample(s, 1.0, [](double x) { return x * x; })) - 4.0) <= 0.04);
    CHECK(std::abs(e.gexp(StateField::sample(s, 1.0, [](double x) { return -x * x; })) + 1.0) <= 0.01);
    const double relu = e.gexp(StateField::sample(s, 1.0, [](double x) { return std::max(x, 0.0); }));
    CHECK(std::abs(relu - 2.0 / std::sqrt(2.0 * std::numbers::pi)) <= 0.008);
    CHECK(std::abs(e.gexp(StateField::sample(s, 1.0, [](double x) { return x; }))) <= 1e-3);
}

TEST_CASE("solve_gheat validates times") {
    GEngine e = desk_engine(1.0, 2.0, 101, 4);
    StateField f = StateField::sample(e.space(), 0.5, [](double x) { return x * x; });
    CHECK_THROWS_AS(e.solve_gheat(f, 0.75), InvalidInput);
    CHECK_THROWS_AS(e.solve_gheat(StateField::constant(e.space(), 0.3, 1.0), 0.0), InvalidInput);
    CHECK_THROWS_AS(e.solve_gheat(StateField::constant(SpatialGrid(4.0, 11), 1.0, 1.0), 0.0), InvalidInput);
    // two-slice nesting: E[E_{1/2}[x^2 at 1] ] equals the one-shot value
    StateField at_one = StateField::sample(e.space(), 1.0, [](double x) { return x * x; });
    StateField mid = e.solve_gheat(at_one, 0.5);
    CHECK(e.gexp(mid) == doctest::Approx(e.gexp(at_one)).epsilon(1e-12));
}

TEST_CASE("classical expectation oracles") {
    SpatialGrid s(16.0, 401);
    auto sq = StateField::sample(s, 1.0, [](double x) { return x * x; });
    auto ab = StateField::sample(s, 1.0, [](double x) { return std::abs(x); });
    CHECK(classical_expectation(sq, 1.0) == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(classical_expectation(ab, 1.0) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-4));
    CHECK(classical_expectation(StateField::constant(s, 1.0, 3.5), 1.0) == 3.5);
    // a field that is linear everywhere is integrated exactly
    auto lin = StateField::sample(s, 1.0, [](double x) { return 2.0 + 3.0 * x; });
    CHECK(classical_expectation(lin, 1.3) == doctest::Approx(2.0).epsilon(1e-12));
    // chord interpolation of x^2 overshoots by exactly dx^2 / 6
    SpatialGrid fine(12.0, 4801);
    auto sq_fine = StateField::sample(fine, 1.0, [](double x) { return x * x; });
    CHECK(classical_expectation(sq_fine, 1.0) - 1.0 == doctest::Approx(fine.dx() * fine.dx() / 6.0).epsilon(1e-6));
    CHECK(std::abs(classical_expectation(sq_fine, 1.0, QuadratureRule::gauss_hermite) - 1.0) <= 1e-5);
    auto at_zero = StateField::sample(s, 0.0, [](double x) { return std::cos(x); });
    CHECK(classical_expectation(at_zero, 1.0) == 1.0);
    CHECK_THROWS_AS(classical_expectation(sq, 0.0), InvalidInput);
}

TEST_CASE("gauss hermite rule integrates polynomials") {
    const HermiteRule& r = gauss_hermite(64);
    double w = 0.0, m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        w += r.weights[i];
        m2 += r.weights[i] * r.nodes[i] * r.nodes[i];
        m4 += r.weights[i] * std::pow(r.nodes[i], 4);
    }
    CHECK(w == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
    CHECK(m2 == doctest::Approx(std::sqrt(std::numbers::pi) / 2.0).epsilon(1e-13));
    CHECK(m4 == doctest::Approx(3.0 * std::sqrt(std::numbers::pi) / 4.0).epsilon(1e-12));
}

TEST_CASE("scenario lower bound") {
    GEngine e = desk_engine(1.0, 2.0);
    auto sq = StateField::sample(e.space(), 1.0, [](double x) { return x * x; });
    const double g = e.gexp(sq);
    const double top[] = {2.0};
    const double bottom[] = {1.0};
    CHECK(std::abs(scenario_lower_bound(sq, top, e.band()) - g) <= 0.04);
    CHECK(scenario_lower_bound(sq, bottom, e.band()) < g - 1.0);
    const double both[] = {1.0, 1.5, 2.0};
    CHECK(scenario_lower_bound(StateField::constant(e.space(), 1.0, 2.5), both, e.band()) == 2.5);
    const double outside[] = {2.5};
    CHECK_THROWS_AS(scenario_lower_bound(sq, outside, e.band()), InvalidInput);
}

TEST_CASE("degenerate band matches the heat equation") {
    GEngine e = desk_engine(1.0, 1.0);
    std::mt19937_64 rng(31);
    for (int i = 0; i < 20; ++i) {
        auto p = StateField::sample(e.space(), 1.0, draw(rng));
        CHECK(std::abs(e.gexp(p) - classical_expectation(p, 1.0)) <= 5e-3);
    }
}

TEST_CASE("sublinear expectation axioms") {
    GEngine e = desk_engine(1.0, 2.0, 201, 10);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> U(0.0, 3.0);
    for (int i = 0; i < 25; ++i) {
        auto fp = draw(rng), gp = draw(rng);
        auto phi = StateField::sample(e.space(), 1.0, fp);
        auto psi = StateField::sample(e.space(), 1.0, gp);
        auto sum = StateField::sample(e.space(), 1.0, [&](double x) { return fp(x) + gp(x); });
        CHECK(e.gexp(sum) <= e.gexp(phi) + e.gexp(psi) + 2e-3);
        const double lam = U(rng);
        auto scaled = phi.map([&](double, double v) { return lam * v; });
        CHECK(std::abs(e.gexp(scaled) - lam * e.gexp(phi)) <= 1e-10);
        const double c = U(rng) - 1.5;
        auto shifted = phi.map([&](double, double v) { return v + c; });
        CHECK(std::abs(e.gexp(shifted) - (e.gexp(phi) + c)) <= 1e-10);
        auto upper = phi.map([&](double x, double v) { return std::max(v, psi.interpolate(x)); });
        CHECK(e.gexp(phi) <= e.gexp(upper) + 1e-10);
    }
}
