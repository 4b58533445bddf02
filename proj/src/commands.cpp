#include "dmrg/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>

#include "dmrg/errors.hpp"
#include "dmrg/skorokhod.hpp"

namespace dmrg {

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

std::ofstream open_output(const std::filesystem::path& out, const std::string& name) {
    std::filesystem::create_directories(out);
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw InvalidInput("cannot write '" + (out / name).string() + "'");
    return f;
}

void row(std::ostream& os, std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) os << ',';
        os << format_number(v);
        first = false;
    }
    os << '\n';
}

// Piecewise-linear path through uniform knots in [-2, 2] starting inside [-1, 1].
std::vector<double> random_path(const TimeGrid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> wide(-2.0, 2.0), start(-1.0, 1.0);
    const int stride = std::max(1, grid.steps() / 8);
    std::vector<double> knots{start(rng)};
    for (int i = stride; i < grid.steps() + stride; i += stride) knots.push_back(wide(rng));
    std::vector<double> v(static_cast<std::size_t>(grid.size()));
    for (int i = 0; i < grid.size(); ++i) {
        const int k = i / stride;
        const double w = static_cast<double>(i % stride) / stride;
        v[static_cast<std::size_t>(i)] = (1.0 - w) * knots[static_cast<std::size_t>(k)] +
                                         (w > 0.0 ? w * knots[static_cast<std::size_t>(k + 1)] : 0.0);
    }
    return v;
}

}  // namespace

int cmd_gexp(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
    const GEngine engine = config_engine(cfg);
    const Expression payoff = Expression::parse(cfg.payoff);
    const TimeGrid& grid = engine.time();
    const double horizon = grid.horizon();
    const StateField terminal = StateField::sample(engine.space(), horizon, [&](double x) { return payoff(x, horizon); });
    const double sigmas[] = {engine.band().sigma_lower, 0.5 * (engine.band().sigma_lower + engine.band().sigma_upper), engine.band().sigma_upper};

    std::ofstream csv = open_output(out, "gexp.csv");
    csv << "t,gexp,classical_lower,classical_upper,scenario_lower_bound\n";
    for (int i = 0; i < grid.size(); ++i) {
        const double t = grid.node(i);
        const double g = engine.solve_gheat(terminal, horizon - t).at_origin();
        const StateField at_t(engine.space(), t, std::vector<double>(terminal.values().begin(), terminal.values().end()));
        const double lo = t > 0.0 ? classical_expectation(at_t, engine.band().sigma_lower) : at_t.interpolate(0.0);
        const double hi = t > 0.0 ? classical_expectation(at_t, engine.band().sigma_upper) : at_t.interpolate(0.0);
        const double sc = t > 0.0 ? scenario_lower_bound(at_t, sigmas, engine.band()) : at_t.interpolate(0.0);
        row(csv, {t, g, lo, hi, sc});
    }
    log << "gexp: E[" << cfg.payoff << "] = " << format_number(engine.gexp(terminal)) << " at t = " << format_number(horizon)
        << '\n';
    return exit_ok;
}

int cmd_skorokhod(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
    RunConfig c = cfg;
    if (c.path_preset == "ramp") {
        c.horizon = 2.0;
        c.input = "t";
        c.lower = "0";
        c.upper = "1";
        c.direction = "forward";
    } else if (c.path_preset == "interior") {
        c.input = "0.5*sin(6.283185307179586*t)";
        c.lower = "-1";
        c.upper = "1";
    } else if (c.path_preset == "random") {
        c.lower = "-1";
        c.upper = "1";
        c.direction = "forward";
    }
    const TimeGrid grid = config_grid(c);
    const Expression lo = Expression::parse(c.lower), hi = Expression::parse(c.upper), in = Expression::parse(c.input);
    const Band band(GridCurve::sample(grid, [&](double t) { return lo(0.0, t); }),
                    GridCurve::sample(grid, [&](double t) { return hi(0.0, t); }));
    const GridCurve xbar = c.path_preset == "random" ? GridCurve(grid, random_path(grid, c.seed))
                                                     : GridCurve::sample(grid, [&](double t) { return in(0.0, t); });
    const bool backward = c.direction == "backward";
    const SkorokhodSolution sol = backward ? backward_skorokhod(xbar, c.anchor, band) : forward_skorokhod(xbar, band);
    const MinimalityReport rep = check_minimality(sol, band, 1e-10);

    std::ofstream csv = open_output(out, "skorokhod.csv");
    csv << "t,xbar,l,u,x,k,tv_k\n";
    for (int i = 0; i < grid.size(); ++i) {
        row(csv, {grid.node(i), xbar[i], band.lower()[i], band.upper()[i], sol.x[i], sol.k.value(i), sol.k.variation(i)});
    }
    csv << "# direction," << (backward ? "backward" : "forward") << '\n';
    csv << "# lower_sum," << format_number(rep.lower_sum) << '\n';
    csv << "# upper_sum," << format_number(rep.upper_sum) << '\n';
    csv << "# sign_violation," << format_number(rep.sign_violation) << '\n';
    csv << "# decomposition_residual," << format_number(rep.decomposition_residual) << '\n';
    csv << "# containment_violation," << format_number(rep.containment_violation) << '\n';
    csv << "# passed," << (rep.passed() ? 1 : 0) << '\n';
    log << "skorokhod: " << (backward ? "backward" : "forward") << " map, minimality "
        << (rep.passed() ? "passed" : "FAILED") << ", TV(k) = " << format_number(sol.k.total_variation()) << '\n';
    return rep.passed() ? exit_ok : exit_failed;
}

namespace {

struct SolveOutcome {
    DMRSolution solution;
    std::vector<double> truncation_levels;
    std::vector<double> truncation_distances;
};

// K = Ybar-equation regulator with the deterministic shift folded into the generator.
KDiagnostic shifted_K(const DMRProblem& p, const ComponentSolution& c, VolatilityChoice choice, double sigma, int paths,
                      std::uint64_t seed) {
    GBSDESolution bar;
    bar.values = c.unreflected;
    bar.gradients = c.gradients;
    const TimeGrid& grid = p.engine.time();
    std::vector<double> rho(c.shift.values().begin(), c.shift.values().end());
    GeneratorSpec f = p.components[0].generator;
    f.fn = [inner = p.components[0].generator.fn, rho, grid](double t, std::span<const double> y, double z) {
        const double pos = std::clamp(t / grid.dt(), 0.0, static_cast<double>(grid.steps()));
        const auto i = static_cast<std::size_t>(std::min(std::floor(pos), static_cast<double>(grid.steps() - 1)));
        const double w = pos - static_cast<double>(i);
        const double shift = (1.0 - w) * rho[i] + w * rho[i + 1];
        const double shifted = y[0] + shift;
        return inner(t, std::span<const double>(&shifted, 1), z);
    };
    return pathwise_K_diagnostic(p.engine, bar, f, choice, sigma, paths, seed);
}

}  // namespace

int cmd_solve(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
    const DMRProblem problem = build_problem(cfg);
    const PicardOptions opts = config_picard(cfg);
    SolveOutcome outcome;
    if (problem.regime == Regime::quadratic_unbounded) {
        TruncationReport rep = truncated_solve(problem, cfg.truncation, opts);
        outcome.solution = std::move(rep.solution);
        outcome.truncation_levels = std::move(rep.levels);
        outcome.truncation_distances = std::move(rep.distances);
    } else {
        outcome.solution = problem.dimension() == 1 ? picard_solve(problem, opts) : multidim_solve(problem, opts);
    }
    const DMRSolution& sol = outcome.solution;
    const TimeGrid& grid = problem.engine.time();

    for (std::size_t j = 0; j < sol.components.size(); ++j) {
        const ComponentSolution& c = sol.components[j];
        const Band& band = problem.components[j].band;
        std::ofstream csv = open_output(out, "trace_" + std::to_string(j + 1) + ".csv");
        csv << "t,E_hbar,l,u,rho,TV_R,Y0,Z0\n";
        for (int i = 0; i < grid.size(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            row(csv, {grid.node(i), c.loss_trace[i], band.lower()[i], band.upper()[i], c.shift[i], c.regulator.variation(i),
                      c.values[k].at_origin(), c.gradients[k].at_origin()});
        }
    }
    {
        std::ofstream csv = open_output(out, "picard.csv");
        csv << "iteration,distance\n";
        for (std::size_t k = 0; k < sol.history.size(); ++k) csv << (k + 1) << ',' << format_number(sol.history[k]) << '\n';
    }

    const double residual = problem.regime == Regime::quadratic_unbounded ? 0.0 : fixed_point_residual(problem, sol, opts);
    const bool residual_ok = problem.regime == Regime::quadratic_unbounded || residual < 2.0 * opts.tol;
    std::ofstream cert = open_output(out, "cert.txt");
    cert << "label: " << sol.label << '\n';
    cert << "regime: " << regime_name(problem.regime) << '\n';
    cert << "components: " << sol.components.size() << '\n';
    cert << "picard sweeps: " << sol.history.size() << '\n';
    cert << "fixed point residual: " << format_number(residual) << " (limit " << format_number(2.0 * opts.tol) << ")\n";
    for (std::size_t k = 0; k < outcome.truncation_levels.size(); ++k) {
        cert << "truncation level " << format_number(outcome.truncation_levels[k]);
        if (k > 0) cert << ": distance to previous " << format_number(outcome.truncation_distances[k - 1]);
        cert << '\n';
    }
    for (std::size_t j = 0; j < sol.components.size(); ++j) {
        const ComponentSolution& c = sol.components[j];
        const MeanLevelCertificate& m = c.certificate;
        cert << "[component " << (j + 1) << "]\n";
        cert << "  mean level lower sum: " << format_number(m.lower_sum) << '\n';
        cert << "  mean level upper sum: " << format_number(m.upper_sum) << '\n';
        cert << "  sign violation: " << format_number(m.sign_violation) << '\n';
        cert << "  containment violation: " << format_number(m.containment_violation) << '\n';
        cert << "  flat violation: " << format_number(m.flat_violation) << '\n';
        cert << "  minimality: " << (m.passed(opts.reflect) ? "pass" : "FAIL") << '\n';
        cert << "  a priori bound margin: " << format_number(c.apriori.worst_margin) << " at node " << c.apriori.worst_node
             << (c.apriori.passed() ? " pass" : " FAIL") << '\n';
        cert << "  TV(R): " << format_number(c.regulator.total_variation()) << '\n';
    }
    if (cfg.k_paths > 0 && problem.dimension() == 1) {
        const ComponentSolution& c = sol.components[0];
        const KDiagnostic top = shifted_K(problem, c, VolatilityChoice::argmax, 0.0, cfg.k_paths, cfg.seed);
        const KDiagnostic low =
            shifted_K(problem, c, VolatilityChoice::constant, problem.engine.band().sigma_lower, cfg.k_paths, cfg.seed);
        cert << "[K diagnostic]\n";
        cert << "  argmax volatility: mean K_T " << format_number(top.mean_terminal) << " se "
             << format_number(top.se_terminal) << (top.flat ? " flat" : " not flat") << '\n';
        cert << "  lower volatility: mean K_T " << format_number(low.mean_terminal) << " se "
             << format_number(low.se_terminal) << (low.nonincreasing_in_mean ? " nonincreasing" : " INCREASING") << '\n';
    }
    const bool ok = (sol.certified || sol.label == "stabilized") && residual_ok;
    cert << "overall: " << (ok ? "pass" : "FAIL") << '\n';
    log << "solve: " << sol.label << " after " << sol.history.size() << " sweeps, Y(0,0) = "
        << format_number(sol.components[0].values[0].at_origin()) << '\n';
    return ok ? exit_ok : exit_failed;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const InvalidInput& e) {
        err << "validation error: " << e.what() << '\n';
        return exit_validation;
    } catch (const ConfigurationError& e) {
        err << "validation error: " << e.what() << '\n';
        return exit_validation;
    } catch (const DegenerateBandError& e) {
        err << "validation error: " << e.what() << '\n';
        return exit_validation;
    } catch (const DivergenceError& e) {
        err << "divergence: " << e.what() << '\n';
        return exit_divergence;
    } catch (const ConvergenceError& e) {
        err << "no convergence: " << e.what() << " (last residual " << format_number(e.last_residual()) << ")\n";
        return exit_nonconvergence;
    } catch (const InconclusiveError& e) {
        err << "inconclusive: " << e.what() << '\n';
        return exit_inconclusive;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failed;
    }
}

}  // namespace dmrg
