#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "dmrg/errors.hpp"
#include "dmrg/mean_reflection.hpp"

using namespace dmrg;

namespace {

GEngine small_engine(double lo = 1.0, double hi = 2.0, int n_t = 10, int m = 101) {
    return GEngine(VolatilityBand(lo, hi), SpatialGrid(8.0 * hi, m), make_grid(1.0, n_t));
}

// E_t[phi(B_T)] at every node.
std::vector<StateField> conditional_trajectory(const GEngine& e, const StateField& terminal) {
    std::vector<StateField> out;
    for (int i = 0; i < e.time().size(); ++i) out.push_back(e.solve_gheat(terminal, e.time().node(i)));
    return out;
}

std::vector<StateField> constant_trajectory(const GEngine& e, double c) {
    std::vector<StateField> out;
    for (double t : e.time().nodes()) out.push_back(StateField::constant(e.space(), t, c));
    return out;
}

StateField random_field(const GEngine& e, double t, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double a = U(rng), b = U(rng), c = U(rng), d = U(rng);
    return StateField::sample(e.space(), t, [=](double x) { return a * std::tanh(b * x + c) + d * std::sin(x); });
}

}  // namespace

TEST_CASE("loss function presets and validation") {
    TimeGrid g = make_grid(1.0, 4);
    CHECK_NOTHROW(LossFunction::identity().validate(g, 10.0));
    CHECK_NOTHROW(LossFunction::sine(0.5).validate(g, 10.0));
    CHECK_NOTHROW(LossFunction::affine(2.0, 1.0).validate(g, 10.0));
    LossFunction lying([](double, double y) { return 3.0 * y; }, 1.0, 2.0, 1.0, "lying");
    CHECK_THROWS_AS(lying.validate(g, 1.0), InvalidInput);
    LossFunction flat([](double, double) { return 0.0; }, 1.0, 1.0, 1.0, "flat");
    CHECK_THROWS_AS(flat.validate(g, 1.0), InvalidInput);
    CHECK_THROWS_AS(LossFunction::sine(1.0), InvalidInput);
    CHECK_THROWS_AS(LossFunction::affine(-1.0, 0.0), InvalidInput);
    CHECK(LossFunction::sine(0.5).inverse(0.3, 0.5 + 0.5 * std::sin(0.5)) == doctest::Approx(0.5).epsilon(1e-12));
    Band band(GridCurve::constant(g, 0.0), GridCurve::constant(g, 1.0));
    CHECK_NOTHROW(LossFunction::identity().check_range(band, -5.0, 5.0));
    CHECK_THROWS_AS(LossFunction::identity().check_range(band, 0.5, 5.0), ConfigurationError);
}

TEST_CASE("hbar for linear losses") {
    GEngine e = small_engine();
    std::mt19937_64 rng(1);
    for (int k = 0; k < 5; ++k) {
        StateField X = random_field(e, 0.5, rng);
        CHECK(hbar_mean(e, LossFunction::identity(), 0.5, 0.7, X) == doctest::Approx(0.7).epsilon(1e-12));
    }
    StateField zero = StateField::constant(e.space(), 1.0, 0.0);
    CHECK(hbar_mean(e, LossFunction::affine(2.0, 0.0), 1.0, 1.5, zero) == doctest::Approx(3.0));
    CHECK_THROWS_AS(hbar_mean(e, LossFunction::identity(), 0.5, 0.0, zero), InvalidInput);
}

TEST_CASE("hbar slope audit for the sine loss") {
    GEngine e = small_engine();
    LossFunction loss = LossFunction::sine(0.5);
    StateField X = StateField::sample(e.space(), 1.0, [](double x) { return x; });
    HbarEvaluator h(e, loss, X);
    const double tol = 1e-9;
    CHECK(std::abs(h(0.0) - hbar_mean(e, LossFunction::identity(), 1.0, 0.0, X)) <= 0.5);
    for (double x = -2.0; x <= 2.0; x += 0.5) {
        for (double delta : {0.1, 1.0}) {
            const double diff = h(x + delta) - h(x);
            CHECK(diff >= 0.5 * delta - tol);
            CHECK(diff <= 1.5 * delta + tol);
        }
    }
}

TEST_CASE("barrier inversion") {
    GEngine e = small_engine();
    std::mt19937_64 rng(2);
    StateField X = random_field(e, 0.3, rng);
    auto id = invert_barrier(e, LossFunction::identity(), 0.3, X, 0.42);
    CHECK(id.root == doctest::Approx(0.42).epsilon(1e-10));
    StateField zero = StateField::constant(e.space(), 1.0, 0.0);
    CHECK(invert_barrier(e, LossFunction::affine(2.0, 1.0), 1.0, zero, 3.0).root == doctest::Approx(1.0));
    LossFunction sine = LossFunction::sine(0.5);
    StateField B = StateField::sample(e.space(), 1.0, [](double x) { return x; });
    auto r = invert_barrier(e, sine, 1.0, B, 0.5);
    CHECK(r.probes <= 60);
    CHECK(std::abs(hbar_mean(e, sine, 1.0, r.root, B) - 0.5) <= 1e-8);
    // a saturating loss declared bi-Lipschitz cannot reach far targets
    LossFunction tanh_loss([](double, double y) { return std::tanh(y); }, 0.5, 1.0, 1.0, "tanh");
    CHECK_THROWS_AS(invert_barrier(e, tanh_loss, 1.0, zero, 2.0), ConfigurationError);
}

TEST_CASE("operator Lipschitz bound on random field pairs") {
    GEngine e = small_engine(1.0, 2.0, 4, 81);
    LossFunction loss = LossFunction::sine(0.5);
    const double ratio = 2.0 * loss.slope_upper() / loss.slope_lower();
    std::mt19937_64 rng(3);
    for (int k = 0; k < 10; ++k) {
        StateField X1 = random_field(e, 0.5, rng), X2 = random_field(e, 0.5, rng);
        std::vector<double> d(X1.values().size());
        for (int j = 0; j < X1.grid().size(); ++j) d[static_cast<std::size_t>(j)] = std::abs(X1[j] - X2[j]);
        const double gap = e.gexp(StateField(X1.grid(), 0.5, d));
        for (double target : {-0.3, 0.8}) {
            const double a = invert_barrier(e, loss, 0.5, X1, target).root;
            const double b = invert_barrier(e, loss, 0.5, X2, target).root;
            CHECK(std::abs(a - b) <= ratio * gap + 1e-6);
        }
    }
}

TEST_CASE("interior trajectory is left alone") {
    GEngine e = small_engine(1.0, 1.0, 10, 121);
    Band band(GridCurve::constant(e.time(), 0.5), GridCurve::constant(e.time(), 1.0));
    auto traj = conditional_trajectory(e, StateField::sample(e.space(), 1.0, [](double x) { return std::abs(x); }));
    auto curve = reflect_sublinear(e, LossFunction::identity(), band, traj);
    CHECK(curve.regulator.total_variation() == 0.0);
    for (int i = 0; i < e.time().size(); ++i) {
        CHECK(curve.mean_level[i] == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(5e-3));
        CHECK(curve.fields[static_cast<std::size_t>(i)].at_origin() == traj[static_cast<std::size_t>(i)].at_origin());
    }
    CHECK(curve.certificate.passed(ReflectOptions{}));
    CHECK(apriori_R_bound(e, curve, traj, LossFunction::identity(), band).passed());
}

TEST_CASE("falling lower barrier pushes the mean up") {
    GEngine e = small_engine(1.0, 2.0, 20, 81);
    Band band(GridCurve::sample(e.time(), [](double t) { return 1.0 - t; }), GridCurve::constant(e.time(), 2.0));
    auto traj = constant_trajectory(e, 0.0);
    auto curve = reflect_sublinear(e, LossFunction::identity(), band, traj);
    for (int i = 0; i < e.time().size(); ++i) {
        CHECK(curve.shift[i] == doctest::Approx(1.0 - e.time().node(i)).scale(1.0).epsilon(1e-12));
    }
    CHECK(curve.certificate.passed(ReflectOptions{}));
    auto bound = apriori_R_bound(e, curve, traj, LossFunction::identity(), band);
    CHECK(bound.passed());
    CHECK(bound.lhs[0] == doctest::Approx(1.0));
}

TEST_CASE("terminal admissibility is enforced") {
    GEngine e = small_engine(1.0, 2.0, 4, 41);
    Band band(GridCurve::constant(e.time(), 0.5), GridCurve::constant(e.time(), 1.0));
    CHECK_THROWS_AS(reflect_sublinear(e, LossFunction::identity(), band, constant_trajectory(e, 0.0)), InvalidInput);
}

TEST_CASE("both centrings produce the same constrained trace") {
    GEngine e = small_engine(1.0, 2.0, 10, 81);
    Band band(GridCurve::sample(e.time(), [](double t) { return 0.2 - 0.5 * t; }),
              GridCurve::sample(e.time(), [](double t) { return 0.6 + 0.1 * t; }));
    auto traj = conditional_trajectory(e, StateField::sample(e.space(), 1.0, [](double x) { return 0.2 * std::tanh(x); }));
    ReflectOptions lower_opts;
    lower_opts.construction = Construction::lower;
    auto up = reflect_sublinear(e, LossFunction::identity(), band, traj);
    auto lo = reflect_sublinear(e, LossFunction::identity(), band, traj, lower_opts);
    for (int i = 0; i < e.time().size(); ++i) {
        CHECK(up.loss_trace[i] == doctest::Approx(lo.loss_trace[i]).epsilon(1e-8));
    }
    CHECK(up.regulator.total_variation() > 0.1);
    CHECK(lo.certificate.passed(lower_opts));
}

TEST_CASE("nonlinear loss reflection is certified and matches the equivalence bridge") {
    GEngine e = small_engine(1.0, 2.0, 8, 61);
    LossFunction loss = LossFunction::sine(0.5);
    Band band(GridCurve::sample(e.time(), [](double t) { return 0.3 - 0.6 * t; }), GridCurve::constant(e.time(), 1.0));
    auto traj = conditional_trajectory(e, StateField::sample(e.space(), 1.0, [](double x) { return 0.3 * std::tanh(x); }));
    ReflectOptions opts;
    auto curve = reflect_sublinear(e, loss, band, traj, opts);
    CHECK(curve.certificate.passed(opts));
    CHECK(curve.regulator.total_variation() > 0.0);
    for (int i = 0; i < e.time().size(); ++i) {
        const double level = curve.mean_level[i] + curve.shift[i];
        const bool at_lower = level <= curve.lower_operator[i] + 1e-7;
        const bool trace_at_lower = curve.loss_trace[i] <= band.lower()[i] + 1e-6;
        CHECK(at_lower == trace_at_lower);
        // deterministic shift
        const auto& y = curve.fields[static_cast<std::size_t>(i)];
        for (int j = 0; j < y.grid().size(); j += 7)
            CHECK(std::abs(y[j] - traj[static_cast<std::size_t>(i)][j] - curve.shift[i]) <= 1e-15);
    }
    CHECK(apriori_R_bound(e, curve, traj, loss, band).passed());
}

TEST_CASE("stability of the shift") {
    GEngine e = small_engine(1.0, 2.0, 8, 61);
    Band band(GridCurve::sample(e.time(), [](double t) { return 0.3 - 0.6 * t; }), GridCurve::constant(e.time(), 1.0));
    auto traj = conditional_trajectory(e, StateField::sample(e.space(), 1.0, [](double x) { return 0.3 * std::tanh(x); }));
    LossFunction id = LossFunction::identity();
    auto c1 = reflect_sublinear(e, id, band, traj);
    auto same = stability_check(e, c1, {id, band, traj}, c1, {id, band, traj});
    CHECK(same.passed());
    CHECK(same.lhs[0] == 0.0);

    std::vector<StateField> moved;
    for (const auto& f : traj) moved.push_back(f.map([](double, double v) { return v + 0.1; }));
    auto c2 = reflect_sublinear(e, id, band, moved);
    CHECK(stability_check(e, c1, {id, band, traj}, c2, {id, band, moved}).passed());

    LossFunction s1([](double, double y) { return y; }, 0.5, 1.5, 1.0, "identity");
    LossFunction s2 = LossFunction::sine(0.5);
    auto d1 = reflect_sublinear(e, s1, band, traj);
    auto d2 = reflect_sublinear(e, s2, band, traj);
    CHECK(stability_check(e, d1, {s1, band, traj}, d2, {s2, band, traj}).passed());
    CHECK_THROWS_AS(stability_check(e, c1, {id, band, traj}, d2, {s2, band, traj}), InvalidInput);
}

TEST_CASE("randomized a priori and stability bounds") {
    GEngine e = small_engine(1.0, 2.0, 8, 41);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    LossFunction loss = LossFunction::identity();
    int passed = 0;
    for (int k = 0; k < 20; ++k) {
        const double a = U(rng), b = U(rng);
        auto terminal = StateField::sample(e.space(), 1.0, [=](double x) { return 0.4 * std::tanh(a * x) + 0.1 * b; });
        auto traj = conditional_trajectory(e, terminal);
        Band band(GridCurve::sample(e.time(), [=](double t) { return -0.5 + 0.4 * std::sin(3.0 * t + a); }),
                  GridCurve::sample(e.time(), [=](double t) { return 0.5 + 0.3 * std::cos(2.0 * t + b); }));
        auto curve = reflect_sublinear(e, loss, band, traj);
        std::vector<StateField> moved;
        for (const auto& f : traj) moved.push_back(f.map([&](double, double v) { return v + 0.05 * a; }));
        auto other = reflect_sublinear(e, loss, band, moved);
        passed += curve.certificate.passed(ReflectOptions{}) && apriori_R_bound(e, curve, traj, loss, band).passed() &&
                  stability_check(e, curve, {loss, band, traj}, other, {loss, band, moved}).passed();
    }
    CHECK(passed == 20);
}
