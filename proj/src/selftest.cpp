#include "dmrg/selftest.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "dmrg/commands.hpp"
#include "dmrg/errors.hpp"
#include "dmrg/presets.hpp"
#include "dmrg/skorokhod.hpp"

namespace dmrg {

bool SelftestReport::passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return !checks.empty();
}

bool SelftestReport::criterion_passed(int criterion) const {
    bool any = false;
    for (const auto& c : checks) {
        if (c.criterion != criterion) continue;
        if (!c.passed) return false;
        any = true;
    }
    return any;
}

double SelftestReport::seconds() const {
    double s = 0.0;
    for (const auto& c : checks) s += c.seconds;
    return s;
}

void write_report(const SelftestReport& report, std::ostream& os) {
    for (const auto& c : report.checks) {
        os << (c.passed ? "PASS" : "FAIL") << " [" << c.criterion << "] " << c.name << ": " << c.detail << '\n';
    }
    os << (report.passed() ? "ALL PASS" : "FAILURES PRESENT") << '\n';
}

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool passed;
    std::string detail;
};

std::string num(double v) { return format_number(v); }

std::mt19937_64 stream(std::uint64_t seed, int salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

GEngine engine(double lo, double hi, int n_t, int m, double half_width = 16.0) {
    return GEngine(VolatilityBand(lo, hi), SpatialGrid(half_width, m), make_grid(1.0, n_t));
}

StateField random_payoff(const GEngine& e, double t, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double a = U(rng), b = U(rng), c = U(rng), d = U(rng), w = 0.5 + 0.5 * std::abs(U(rng));
    return StateField::sample(e.space(), t, [=](double x) { return a * std::tanh(b * x + c) + d * std::sin(w * x); });
}

std::vector<StateField> conditional_trajectory(const GEngine& e, const StateField& terminal) {
    std::vector<StateField> out;
    for (double t : e.time().nodes()) out.push_back(e.solve_gheat(terminal, t));
    return out;
}

ReflectedCurve view_of(const ComponentSolution& c) {
    return ReflectedCurve{c.shift,      c.regulator,      {},         c.loss_trace,
                          c.mean_level, c.lower_operator, c.upper_operator, c.certificate};
}

GridCurve shifted(const GridCurve& c, double d) {
    std::vector<double> v(c.values().begin(), c.values().end());
    for (double& x : v) x += d;
    return GridCurve(c.grid(), std::move(v), c.regularity());
}

double max_field_gap(const std::vector<StateField>& a, const std::vector<StateField>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        for (int j = 0; j < a[k].grid().size(); ++j) d = std::max(d, std::abs(a[k][j] - b[k][j]));
    return d;
}

// ---- criterion 1

Outcome forward_oracle(std::uint64_t seed) {
    auto rng = stream(seed, 1);
    std::uniform_real_distribution<double> wide(-2.0, 2.0), start(-1.0, 1.0);
    const TimeGrid grid = make_grid(1.0, 32);
    const Band band(GridCurve::constant(grid, -1.0), GridCurve::constant(grid, 1.0));
    double worst_gap = 0.0, worst_sum = -1.0;
    bool ok = true;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> knots{start(rng)};
        for (int k = 0; k < 8; ++k) knots.push_back(wide(rng));
        std::vector<double> v(33);
        for (int i = 0; i <= 32; ++i) {
            const int k = std::min(i / 4, 7);
            const double w = (i - 4 * k) / 4.0;
            v[static_cast<std::size_t>(i)] = (1.0 - w) * knots[static_cast<std::size_t>(k)] + w * knots[static_cast<std::size_t>(k + 1)];
        }
        const GridCurve xbar(grid, v);
        const SkorokhodSolution f = forward_skorokhod(xbar, band);
        const OracleResult o = oracle_skorokhod(xbar, band);
        for (int i = 0; i <= 32; ++i) worst_gap = std::max(worst_gap, std::abs(f.x[i] - o.solution.x[i]));
        const MinimalityReport rep = check_minimality(f, band, 1e-10);
        worst_sum = std::max({worst_sum, rep.lower_sum, rep.upper_sum});
        ok = ok && rep.passed();
    }
    ok = ok && worst_gap <= 1e-9 && worst_sum <= 1e-10;
    return {ok, "200 instances, max |formula - oracle| = " + num(worst_gap) + ", max minimality sum = " + num(worst_sum)};
}

// ---- criterion 2

Outcome backward_hand_case() {
    const TimeGrid grid = make_grid(1.0, 200);
    const Band band(GridCurve::sample(grid, [](double t) { return 1.0 - t; }), GridCurve::constant(grid, 2.0));
    const SkorokhodSolution s = backward_skorokhod(GridCurve::constant(grid, 0.0), 0.0, band);
    double err = 0.0;
    for (int i = 0; i <= 200; ++i) {
        err = std::max(err, std::abs((s.k.value(200) - s.k.value(i)) - (1.0 - grid.node(i))));
    }
    const bool minimal = check_minimality(s, band, 1e-10).passed();
    return {err <= 1e-10 && minimal, "max |(k_T - k_t) - (1 - t)| = " + num(err) + (minimal ? ", minimal" : ", NOT minimal")};
}

// ---- criterion 3

Outcome closed_forms(std::uint64_t seed) {
    const GEngine e = engine(1.0, 2.0, 1, 401);
    auto payoff = [&](double (*fn)(double)) { return StateField::sample(e.space(), 1.0, fn); };
    const double sq = std::abs(e.gexp(payoff([](double x) { return x * x; })) - 4.0);
    const double neg = std::abs(e.gexp(payoff([](double x) { return -x * x; })) + 1.0);
    const double relu = std::abs(e.gexp(payoff([](double x) { return std::max(x, 0.0); })) - 0.79788);
    const GEngine flat = engine(1.0, 1.0, 1, 401);
    auto rng = stream(seed, 3);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const StateField phi = random_payoff(flat, 1.0, rng);
        worst = std::max(worst, std::abs(flat.gexp(phi) - classical_expectation(phi, 1.0)));
    }
    const bool ok = sq <= 0.04 && neg <= 0.01 && relu <= 0.008 && worst <= 5e-3;
    return {ok, "|E[x^2]-4| = " + num(sq) + ", |E[-x^2]+1| = " + num(neg) + ", |E[x+]-0.79788| = " + num(relu) +
                    ", degenerate vs classical = " + num(worst)};
}

// ---- criterion 4

Outcome axioms(std::uint64_t seed) {
    const GEngine e = engine(1.0, 2.0, 1, 201);
    auto rng = stream(seed, 4);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double exact = 0.0, sub = 0.0, mono = 0.0;
    for (int k = 0; k < 50; ++k) {
        const StateField a = random_payoff(e, 1.0, rng), b = random_payoff(e, 1.0, rng);
        const double ea = e.gexp(a), eb = e.gexp(b);
        const double lambda = 0.5 + 2.0 * std::abs(U(rng)), c = 3.0 * U(rng);
        exact = std::max(exact, std::abs(e.gexp(a.map([=](double, double v) { return lambda * v; })) - lambda * ea));
        exact = std::max(exact, std::abs(e.gexp(a.map([=](double, double v) { return v + c; })) - (ea + c)));
        std::vector<double> sum(a.values().size()), hi(a.values().size());
        for (std::size_t j = 0; j < sum.size(); ++j) {
            sum[j] = a.values()[j] + b.values()[j];
            hi[j] = a.values()[j] + std::abs(b.values()[j]);
        }
        sub = std::max(sub, e.gexp(StateField(e.space(), 1.0, sum)) - (ea + eb));
        mono = std::max(mono, ea - e.gexp(StateField(e.space(), 1.0, hi)));
    }
    const bool ok = exact <= 1e-10 && sub <= 2e-3 && mono <= 2e-3;
    return {ok, "homogeneity/translation error = " + num(exact) + ", sublinearity excess = " + num(sub) +
                    ", monotonicity excess = " + num(mono)};
}

// ---- criterion 5

Outcome operators(std::uint64_t seed) {
    const GEngine e = engine(1.0, 2.0, 4, 81);
    auto rng = stream(seed, 5);
    const LossFunction id = LossFunction::identity();
    double identity_err = 0.0;
    for (double target : {-0.7, 0.0, 0.35, 1.2}) {
        const StateField X = random_payoff(e, 0.5, rng);
        identity_err = std::max(identity_err, std::abs(invert_barrier(e, id, 0.5, X, target).root - target));
    }
    const LossFunction sine = LossFunction::sine(0.5);
    const double ratio = 2.0 * sine.slope_upper() / sine.slope_lower();
    double lip_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 50; ++k) {
        const StateField X1 = random_payoff(e, 0.5, rng), X2 = random_payoff(e, 0.5, rng);
        std::vector<double> d(X1.values().size());
        for (std::size_t j = 0; j < d.size(); ++j) d[j] = std::abs(X1.values()[j] - X2.values()[j]);
        const double gap = e.gexp(StateField(e.space(), 0.5, d));
        for (double target : {-0.3, 0.8}) {
            const double a = invert_barrier(e, sine, 0.5, X1, target).root;
            const double b = invert_barrier(e, sine, 0.5, X2, target).root;
            lip_margin = std::min(lip_margin, ratio * gap - std::abs(a - b));
        }
    }
    const StateField B = StateField::sample(e.space(), 1.0, [](double x) { return x; });
    const HbarEvaluator h(e, sine, B);
    const double tol = 1e-9;
    double slope_lo = std::numeric_limits<double>::infinity(), slope_hi = -slope_lo;
    for (double x = -2.0; x <= 2.0; x += 0.25) {
        for (double delta : {0.05, 0.5, 1.0}) {
            const double s = (h(x + delta) - h(x)) / delta;
            slope_lo = std::min(slope_lo, s);
            slope_hi = std::max(slope_hi, s);
        }
    }
    const bool ok = identity_err <= 1e-8 && lip_margin >= -1e-6 && slope_lo >= sine.slope_lower() - tol &&
                    slope_hi <= sine.slope_upper() + tol;
    return {ok, "identity |L - l| = " + num(identity_err) + ", Lipschitz margin = " + num(lip_margin) +
                    ", Hbar slopes in [" + num(slope_lo) + ", " + num(slope_hi) + "]"};
}

// ---- criterion 6

Outcome interior_hand_case() {
    const DMRProblem p = interior_preset({20, 101});
    const DMRSolution s = picard_solve(p);
    const auto& c = s.components[0];
    const double tv = c.regulator.total_variation();
    const double gap = max_field_gap(c.values, c.unreflected);
    return {tv <= 1e-6 && gap == 0.0 && s.certified, "TV(R) = " + num(tv) + ", max |Y - Ybar| = " + num(gap)};
}

Outcome ramp_hand_case() {
    auto error = [](PresetSize size) {
        const DMRProblem p = lower_ramp_preset(size);
        const DMRSolution s = picard_solve(p);
        double err = 0.0;
        for (int i = 0; i < p.engine.time().size(); ++i) {
            err = std::max(err, std::abs(s.components[0].shift[i] - (1.0 - p.engine.time().node(i))));
        }
        return std::make_pair(err, s.certified);
    };
    const auto [coarse, c1] = error({100, 201});
    const auto [fine, c2] = error({200, 401});
    const bool refined = fine <= std::max(0.6 * coarse, 1e-12);
    return {fine <= 2e-3 && refined && c1 && c2,
            "max |rho - (1 - t)| = " + num(fine) + " at (200, 401), " + num(coarse) + " at (100, 201)"};
}

// ---- criterion 7

Outcome picard_convergence() {
    const DMRProblem p = lipschitz_preset({20, 101});
    PicardOptions opts;
    opts.tol = 1e-10;
    const DMRSolution s = picard_solve(p, opts);
    const double bound = contraction_factor(p.components[0].loss, p.components[0].generator.lipschitz, 1.0) + 0.1;
    const auto r = s.ratios();
    const double last = r.empty() ? 0.0 : r.back();
    double restart = 0.0;
    for (double start : {-1.0, 1.0}) {
        PicardOptions o = opts;
        o.initial = start;
        restart = std::max(restart, solution_distance(p.engine, s, picard_solve(p, o)));
    }
    const double residual = fixed_point_residual(p, s, opts);
    const bool ok = s.iterations <= 25 && last <= bound && restart <= 5.0 * opts.tol && residual < 2.0 * opts.tol;
    return {ok, std::to_string(s.iterations) + " iterations, last ratio " + num(last) + " (bound " + num(bound) +
                    "), restart distance " + num(restart) + ", residual " + num(residual)};
}

// ---- criterion 8

Outcome preset_bounds() {
    double worst_apriori = std::numeric_limits<double>::infinity();
    double worst_stability = worst_apriori;
    bool ok = true;
    for (const std::string& name : preset_names()) {
        DMRProblem p = make_preset(name, {12, 81});
        DMRSolution s;
        if (p.regime == Regime::quadratic_unbounded) {
            const double schedule[] = {2.0, 4.0, 8.0};
            s = truncated_solve(p, schedule).solution;
        } else {
            s = p.dimension() == 1 ? picard_solve(p) : multidim_solve(p);
        }
        for (const auto& c : s.components) {
            worst_apriori = std::min(worst_apriori, c.apriori.worst_margin);
            ok = ok && c.apriori.passed();
        }
        if (p.dimension() != 1 || p.regime == Regime::quadratic_unbounded) continue;
        DMRProblem q = p;
        const Band& b = p.components[0].band;
        q.components[0].band = Band(shifted(b.lower(), -0.05), b.upper());
        const DMRSolution s2 = picard_solve(q);
        const auto& c1 = s.components[0];
        const auto& c2 = s2.components[0];
        const BoundReport st = stability_check(p.engine, view_of(c1), {p.components[0].loss, b, c1.unreflected}, view_of(c2),
                                               {q.components[0].loss, q.components[0].band, c2.unreflected});
        worst_stability = std::min(worst_stability, st.worst_margin);
        ok = ok && st.passed();
    }
    return {ok, "presets: a priori margin " + num(worst_apriori) + ", stability margin " + num(worst_stability)};
}

Outcome random_bounds(std::uint64_t seed) {
    const GEngine e = engine(1.0, 2.0, 8, 41);
    auto rng = stream(seed, 8);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst_apriori = std::numeric_limits<double>::infinity(), worst_stability = worst_apriori;
    bool ok = true;
    for (int k = 0; k < 20; ++k) {
        const double a = U(rng), b = U(rng), amp = 0.3 * std::abs(U(rng));
        const LossFunction loss = amp > 0.0 ? LossFunction::sine(amp) : LossFunction::identity();
        const auto terminal = StateField::sample(e.space(), 1.0, [=](double x) { return 0.4 * std::tanh(a * x) + 0.1 * b; });
        const auto traj = conditional_trajectory(e, terminal);
        const Band band(GridCurve::sample(e.time(), [=](double t) { return -0.5 + 0.4 * std::sin(3.0 * t + a); }),
                        GridCurve::sample(e.time(), [=](double t) { return 0.5 + 0.3 * std::cos(2.0 * t + b); }));
        const auto curve = reflect_sublinear(e, loss, band, traj);
        std::vector<StateField> moved;
        for (const auto& f : traj) moved.push_back(f.map([&](double x, double v) { return v + 0.05 * a * std::tanh(x); }));
        const auto other = reflect_sublinear(e, loss, band, moved);
        const BoundReport ap = apriori_R_bound(e, curve, traj, loss, band);
        const BoundReport st = stability_check(e, curve, {loss, band, traj}, other, {loss, band, moved});
        worst_apriori = std::min(worst_apriori, ap.worst_margin);
        worst_stability = std::min(worst_stability, st.worst_margin);
        ok = ok && ap.passed() && st.passed() && curve.certificate.passed(ReflectOptions{});
    }
    return {ok, "20 random instances: a priori margin " + num(worst_apriori) + ", stability margin " + num(worst_stability)};
}

// ---- criterion 9

Outcome exponential_bound() {
    const DMRProblem p = quadratic_bounded_preset({10, 121});
    const Component& c = p.components[0];
    const GBSDESolution sol = solve_gbsde(p.engine, c.terminal, c.generator);
    std::vector<double> beta;
    for (const auto& f : sol.values) {
        double m = 0.0;
        for (double v : f.values()) m = std::max(m, std::abs(v));
        beta.push_back(c.generator.lambda * m);
    }
    const MarginReport rep = exp_bound_check(p.engine, sol, c.generator, GridCurve(p.engine.time(), beta), c.generator.gamma, 2.0);
    return {rep.passed(1e-4), "relative margin " + num(rep.worst_margin) + " at node " + std::to_string(rep.worst_node)};
}

Outcome data_stability_constant() {
    auto run = [](PresetSize size) {
        const DMRProblem p = quadratic_bounded_preset(size);
        const Component& c = p.components[0];
        GeneratorSpec bumped = c.generator;
        bumped.fn = [f = c.generator.fn](double t, std::span<const double> y, double z) { return f(t, y, z) + 0.1; };
        const GBSDESolution s1 = solve_gbsde(p.engine, c.terminal, c.generator);
        const GBSDESolution s2 = solve_gbsde(p.engine, c.terminal, bumped);
        return data_stability_check(p.engine, s1, s2, c.generator, bumped, 2.0).constant;
    };
    const double coarse = run({10, 61}), fine = run({20, 121});
    const double ratio = fine / coarse;
    return {coarse > 0.0 && ratio <= 1.5, "constant " + num(coarse) + " -> " + num(fine) + ", ratio " + num(ratio)};
}

// ---- criterion 10

Outcome symmetric_pair() {
    const DMRProblem p = symmetric_pair_preset({16, 81});
    PicardOptions opts;
    const DMRSolution s = multidim_solve(p, opts);
    const double gap = max_field_gap(s.components[0].values, s.components[1].values);
    return {gap <= 5.0 * opts.tol && s.certified, "max |Y1 - Y2| = " + num(gap)};
}

Outcome decoupled_pair() {
    const DMRProblem pair = decoupled_pair_preset({16, 81});
    PicardOptions opts;
    opts.tol = 1e-13;
    const DMRSolution joint = multidim_solve(pair, opts);
    double gap = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        DMRProblem single{pair.engine, {pair.components[j]}, Regime::lipschitz};
        single.components[0].generator.fn = [f = pair.components[j].generator.fn, j](double t, std::span<const double> y,
                                                                                     double z) {
            double both[2] = {0.0, 0.0};
            both[j] = y[0];
            return f(t, both, z);
        };
        gap = std::max(gap, max_field_gap(joint.components[j].values, picard_solve(single, opts).components[0].values));
    }
    return {gap <= 1e-10 && joint.certified, "max |joint - scalar| = " + num(gap)};
}

Outcome binding_pair() {
    const DMRProblem p = binding_pair_preset({16, 81});
    const DMRSolution s = multidim_solve(p);
    const double tv1 = s.components[0].regulator.total_variation(), tv2 = s.components[1].regulator.total_variation();
    return {tv1 > 1e-3 && tv2 <= 1e-8 && s.certified, "TV(R1) = " + num(tv1) + ", TV(R2) = " + num(tv2)};
}

// ---- criterion 11

Outcome truncation() {
    const DMRProblem p = quadratic_unbounded_preset({16, 81});
    const double schedule[] = {2.0, 4.0, 8.0};
    const TruncationReport rep = truncated_solve(p, schedule);
    bool decreasing = true;
    for (std::size_t k = 1; k < rep.distances.size(); ++k) decreasing = decreasing && rep.distances[k] < rep.distances[k - 1];
    std::string d;
    for (double v : rep.distances) d += (d.empty() ? "" : ", ") + num(v);
    return {decreasing && rep.solution.label == "stabilized", "distances " + d + ", label " + rep.solution.label};
}

// ---- extra invariants

Outcome skorokhod_invariants(std::uint64_t seed) {
    auto rng = stream(seed, 20);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const TimeGrid grid = make_grid(1.0, 40);
    double agree = 0.0, idem = 0.0, push = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const double a = U(rng), b = U(rng), c = U(rng);
        const Band band(GridCurve::sample(grid, [=](double t) { return -0.6 + 0.2 * std::sin(4.0 * t + a); }),
                        GridCurve::sample(grid, [=](double t) { return 0.6 + 0.2 * std::cos(3.0 * t + b); }));
        const GridCurve xbar = GridCurve::sample(grid, [=](double t) { return 0.3 * a + 1.5 * std::sin(7.0 * t * (1.0 + c)); });
        const SkorokhodSolution f = forward_skorokhod(xbar, band), d = forward_skorokhod_direct(xbar, band);
        const SkorokhodSolution g = backward_skorokhod(xbar, 0.0, band), h = backward_skorokhod_direct(xbar, 0.0, band);
        for (int i = 0; i < grid.size(); ++i) {
            agree = std::max({agree, std::abs(f.x[i] - d.x[i]), std::abs(g.x[i] - h.x[i])});
        }
        idem = std::max(idem, forward_skorokhod(f.x, band).k.total_variation());
        const Band raised(band.lower(), shifted(band.upper(), 0.2));
        const SkorokhodSolution r = forward_skorokhod(xbar, raised);
        double up_base = 0.0, up_raised = 0.0;
        for (int i = 1; i < grid.size(); ++i) {
            up_base += std::max(f.k.increment(i), 0.0);
            up_raised += std::max(r.k.increment(i), 0.0);
        }
        push = std::max(push, up_raised - up_base);
    }
    const bool ok = agree <= 1e-12 && idem <= 1e-10 && push <= 1e-12;
    return {ok, "formula/recursion gap " + num(agree) + ", idempotence TV " + num(idem) + ", raised-barrier extra push " + num(push)};
}

Outcome negative_paths() {
    std::ostringstream sink;
    const RunConfig gapless = parse_config(
        "time_steps = 8\nspace_points = 41\n[component 1]\npayoff = 0\nlower = 1 - t\nupper = 1 - t\n");
    const int gap_code = guarded([&] { return cmd_solve(gapless, std::filesystem::temp_directory_path(), sink); }, sink);
    const RunConfig wild = parse_config(
        "time_steps = 8\nspace_points = 41\nregime = quadratic_bounded\n[component 1]\npayoff = 5 + tanh(x)\n"
        "generator = 1000*z^2\ngenerator_kind = quadratic\ngamma = 2000\nlower = -10\nupper = 10\n");
    const int wild_code = guarded([&] { return cmd_solve(wild, std::filesystem::temp_directory_path(), sink); }, sink);
    return {gap_code == exit_validation && wild_code == exit_divergence,
            "zero gap exit " + std::to_string(gap_code) + ", huge gamma exit " + std::to_string(wild_code)};
}

Outcome cli_examples(std::uint64_t seed, const std::filesystem::path& out) {
    std::ostringstream log;
    RunConfig g;
    g.payoff = "c:5";
    g.space_points = 101;
    g.time_steps = 4;
    bool ok = cmd_gexp(g, out / "gexp_constant", log) == exit_ok;
    g.payoff = "x^2";
    g.space_points = 401;
    ok = ok && cmd_gexp(g, out / "gexp_square", log) == exit_ok;

    RunConfig s;
    s.path_preset = "ramp";
    s.time_steps = 40;
    ok = ok && cmd_skorokhod(s, out / "skorokhod_ramp", log) == exit_ok;
    s.path_preset = "random";
    s.time_steps = 32;
    s.seed = seed;
    ok = ok && cmd_skorokhod(s, out / "skorokhod_random", log) == exit_ok;

    RunConfig r;
    r.preset = "lower_ramp";
    r.time_steps = 20;
    r.space_points = 81;
    ok = ok && cmd_solve(r, out / "solve_lower_ramp", log) == exit_ok;
    r.preset = "lipschitz";
    r.k_paths = 2000;
    r.seed = seed;
    ok = ok && cmd_solve(r, out / "solve_lipschitz", log) == exit_ok;

    // spot-check file contents
    std::ifstream ramp(out / "solve_lower_ramp" / "trace_1.csv");
    std::string line;
    std::getline(ramp, line);
    double worst = 0.0;
    while (std::getline(ramp, line)) {
        double t = 0, e = 0, l = 0, u = 0, rho = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &e, &l, &u, &rho) == 5) worst = std::max(worst, std::abs(rho - (1.0 - t)));
    }
    std::ifstream constant(out / "gexp_constant" / "gexp.csv");
    std::getline(constant, line);
    bool all_five = true;
    while (std::getline(constant, line)) all_five = all_five && line.find(",5,5,5,5") != std::string::npos;
    ok = ok && worst <= 1e-10 && all_five;
    return {ok, "sample runs written, lower ramp rho error " + num(worst) + (all_five ? ", constant payoff rows = 5" : ", constant payoff rows wrong")};
}

}  // namespace

SelftestReport run_selftest(std::uint64_t seed, const std::filesystem::path& artifacts, std::ostream* progress) {
    SelftestReport report;
    auto run = [&](int criterion, const std::string& name, const std::function<Outcome()>& body, double limit = 0.0) {
        const auto start = Clock::now();
        Outcome o{false, ""};
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        if (limit > 0.0 && secs > limit) {
            o.passed = false;
            o.detail += ", over the " + num(limit) + " s budget";
        }
        report.checks.push_back({criterion, name, o.passed, o.detail, secs});
        if (progress) {
            *progress << (o.passed ? "PASS" : "FAIL") << " [" << criterion << "] " << name << ": " << o.detail << " ("
                      << num(secs) << " s)\n";
        }
    };
    run(1, "forward map vs iterated reflection oracle", [&] { return forward_oracle(seed); }, 10.0);
    run(2, "backward map hand case", backward_hand_case);
    run(3, "G-expectation closed forms", [&] { return closed_forms(seed); }, 60.0);
    run(4, "sublinear expectation axioms", [&] { return axioms(seed); });
    run(5, "mean reflection operators", [&] { return operators(seed); });
    run(6, "interior hand solution", interior_hand_case);
    run(6, "lower ramp hand solution and refinement", ramp_hand_case);
    run(7, "Picard convergence and restarts", picard_convergence);
    run(8, "a priori and stability bounds on presets", preset_bounds);
    run(8, "a priori and stability bounds on random instances", [&] { return random_bounds(seed); });
    run(9, "exponential bound", exponential_bound);
    run(9, "stability constant under refinement", data_stability_constant);
    run(10, "symmetric pair", symmetric_pair);
    run(10, "decoupled pair", decoupled_pair);
    run(10, "binding pair", binding_pair);
    run(11, "truncation schedule", truncation);
    run(0, "skorokhod invariants", [&] { return skorokhod_invariants(seed); });
    run(0, "validation and divergence exits", negative_paths);
    run(0, "sample CLI runs", [&] { return cli_examples(seed, artifacts); });
    return report;
}

int cmd_selftest(std::uint64_t seed, const std::filesystem::path& out, std::ostream& log) {
    const SelftestReport report = run_selftest(seed, out, &log);
    std::filesystem::create_directories(out);
    std::ofstream f(out / "selftest.txt", std::ios::binary);
    write_report(report, f);
    log << (report.passed() ? "selftest: all checks passed" : "selftest: FAILURES") << " in " << num(report.seconds()) << " s\n";
    return report.passed() ? exit_ok : exit_failed;
}

}  // namespace dmrg
