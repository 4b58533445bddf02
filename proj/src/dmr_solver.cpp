#include "dmrg/dmr_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dmrg/errors.hpp"

namespace dmrg {

const char* regime_name(Regime r) noexcept {
    switch (r) {
        case Regime::lipschitz: return "lipschitz";
        case Regime::quadratic_bounded: return "quadratic_bounded";
        case Regime::quadratic_unbounded: return "quadratic_unbounded";
    }
    return "unknown";
}

void DMRProblem::validate(double admissibility_tol) const {
    if (components.empty()) throw InvalidInput("problem: no components");
    const TimeGrid& grid = engine.time();
    const double horizon = grid.horizon();
    const LossFunction& ref = components.front().loss;
    for (std::size_t j = 0; j < components.size(); ++j) {
        const Component& c = components[j];
        const std::string tag = "component " + std::to_string(j + 1) + ": ";
        if (!(c.terminal.grid() == engine.space())) throw InvalidInput(tag + "terminal on another spatial grid");
        if (grid.index_of(c.terminal.time()) != grid.steps()) throw InvalidInput(tag + "terminal must sit at T");
        if (!(c.band.grid() == grid)) throw InvalidInput(tag + "barriers on another time grid");
        if (!c.generator.fn) throw InvalidInput(tag + "missing generator");
        if (c.loss.slope_lower() != ref.slope_lower() || c.loss.slope_upper() != ref.slope_upper() ||
            c.loss.growth() != ref.growth()) {
            throw InvalidInput(tag + "loss constants must be shared by all components");
        }
        c.loss.check_range(c.band, engine.space().x_min(), engine.space().x_max());
        const double expected = engine.gexp(c.terminal.map([&](double, double v) { return c.loss(horizon, v); }));
        const int n = grid.steps();
        if (expected < c.band.lower()[n] - admissibility_tol || expected > c.band.upper()[n] + admissibility_tol) {
            std::ostringstream msg;
            msg << tag << "terminal expected loss " << expected << " outside [" << c.band.lower()[n] << ", "
                << c.band.upper()[n] << "]";
            throw InvalidInput(msg.str());
        }
    }
}

std::vector<double> DMRSolution::ratios() const {
    std::vector<double> r;
    for (std::size_t k = 1; k < history.size(); ++k) r.push_back(history[k - 1] > 0.0 ? history[k] / history[k - 1] : 0.0);
    return r;
}

double contraction_factor(const LossFunction& loss, double lipschitz, double window) {
    const double c = 1.0 + 2.0 * loss.slope_upper() / loss.slope_lower();
    return (1.0 + c) * lipschitz * window;
}

namespace {

using Trajectory = std::vector<StateField>;

double field_distance(const GEngine& engine, const StateField& a, const StateField& b) {
    std::vector<double> d(a.values().size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = std::abs(a.values()[j] - b.values()[j]);
    return engine.gexp(StateField(a.grid(), a.time(), std::move(d)));
}

// Output of one sweep over a node window.
struct SweepResult {
    std::vector<GBSDESolution> solves;
    std::vector<RangeReflection> reflections;
    std::vector<Trajectory> reflected;
};

SweepResult sweep(const DMRProblem& problem, int first, std::span<const StateField> terminals,
                  std::span<const Trajectory> frozen, const PicardOptions& opts) {
    SweepResult out;
    for (std::size_t j = 0; j < problem.components.size(); ++j) {
        const Component& c = problem.components[j];
        GBSDESolution sol = solve_gbsde(problem.engine, terminals[j], c.generator, opts.gbsde, FrozenState{frozen}, first);
        RangeReflection rr = reflect_range(problem.engine, c.loss, c.band, first, sol.values, opts.reflect);
        Trajectory y;
        y.reserve(sol.values.size());
        for (std::size_t k = 0; k < sol.values.size(); ++k) {
            const double rho = rr.shift[k];
            y.push_back(sol.values[k].map([rho](double, double v) { return v + rho; }));
        }
        out.solves.push_back(std::move(sol));
        out.reflections.push_back(std::move(rr));
        out.reflected.push_back(std::move(y));
    }
    return out;
}

double sweep_distance(const GEngine& engine, std::span<const Trajectory> a, std::span<const Trajectory> b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        for (std::size_t k = 0; k < a[j].size(); ++k) d = std::max(d, field_distance(engine, a[j][k], b[j][k]));
    return d;
}

// Per-component accumulators filled window by window.
struct Assembly {
    std::vector<std::vector<std::optional<StateField>>> values, gradients, unreflected;
    std::vector<std::vector<double>> shift, trace, mean, lower, upper;
};

DMRSolution solve_system(const DMRProblem& problem, const PicardOptions& opts) {
    problem.validate(opts.reflect.admissibility_tol);
    if (opts.max_iters < 1 || !(opts.tol > 0.0)) throw InvalidInput("picard: need max_iters >= 1 and tol > 0");
    const GEngine& engine = problem.engine;
    const TimeGrid& grid = engine.time();
    const int n = grid.steps();
    const std::size_t dim = problem.components.size();

    int span_steps = n;
    if (opts.window) {
        if (!(*opts.window > 0.0)) throw InvalidInput("picard: window length must be positive");
        span_steps = std::clamp(static_cast<int>(std::lround(*opts.window / grid.dt())), 1, n);
    }

    Assembly as;
    const std::size_t nodes = static_cast<std::size_t>(grid.size());
    for (auto* v : {&as.values, &as.gradients, &as.unreflected}) v->assign(dim, std::vector<std::optional<StateField>>(nodes));
    for (auto* v : {&as.shift, &as.trace, &as.mean, &as.lower, &as.upper}) v->assign(dim, std::vector<double>(nodes, 0.0));

    DMRSolution result;
    std::vector<StateField> terminals;
    for (const auto& c : problem.components) terminals.push_back(c.terminal);
    std::vector<double> offset(dim, 0.0);  // global shift at the window end

    for (int last = n; last > 0; last -= span_steps) {
        const int first = std::max(0, last - span_steps);
        const std::size_t count = static_cast<std::size_t>(last - first) + 1;
        std::vector<Trajectory> frozen(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            for (std::size_t k = 0; k < count; ++k) {
                const double t = grid.node(first + static_cast<int>(k));
                frozen[j].push_back(k + 1 == count ? terminals[j] : StateField::constant(engine.space(), t, opts.initial));
            }
        }
        std::optional<SweepResult> current;
        bool converged = false;
        for (int it = 0; it < opts.max_iters; ++it) {
            SweepResult next = sweep(problem, first, terminals, frozen, opts);
            const double dist = sweep_distance(engine, next.reflected, frozen);
            result.history.push_back(dist);
            frozen = next.reflected;
            current = std::move(next);
            if (dist < opts.tol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw ConvergenceError("picard: no convergence within " + std::to_string(opts.max_iters) +
                                       " sweeps on window ending at t = " + std::to_string(grid.node(last)),
                                   result.history);
        }
        for (std::size_t j = 0; j < dim; ++j) {
            const RangeReflection& rr = current->reflections[j];
            const GBSDESolution& sol = current->solves[j];
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t node = static_cast<std::size_t>(first) + k;
                if (k + 1 == count && last != n) continue;  // owned by the later window
                const double total = offset[j] + rr.shift[k];
                as.values[j][node] = current->reflected[j][k];
                as.gradients[j][node] = sol.gradients[k];
                as.unreflected[j][node] = current->reflected[j][k].map([total](double, double v) { return v - total; });
                as.shift[j][node] = total;
                as.trace[j][node] = rr.loss_trace[k];
                as.mean[j][node] = rr.mean_level[k] - offset[j];
                as.lower[j][node] = rr.lower_operator[k];
                as.upper[j][node] = rr.upper_operator[k];
            }
            offset[j] += rr.shift[0];
            terminals[j] = current->reflected[j][0];
        }
    }

    int changed = 0;
    for (double d : result.history) changed += d >= opts.tol;
    result.iterations = changed;
    result.certified = true;
    for (std::size_t j = 0; j < dim; ++j) {
        const Component& c = problem.components[j];
        auto unwrap = [](std::vector<std::optional<StateField>>& v) {
            Trajectory out;
            for (auto& f : v) out.push_back(std::move(*f));
            return out;
        };
        Trajectory ybar = unwrap(as.unreflected[j]);
        std::vector<double> reg(nodes);
        for (std::size_t i = 0; i < nodes; ++i) reg[i] = as.shift[j][0] - as.shift[j][i];
        ComponentSolution cs{unwrap(as.values[j]),
                             unwrap(as.gradients[j]),
                             std::move(ybar),
                             GridCurve(grid, as.shift[j]),
                             BVPath::from_values(grid, reg),
                             GridCurve(grid, as.trace[j]),
                             GridCurve(grid, as.mean[j]),
                             GridCurve(grid, as.lower[j]),
                             GridCurve(grid, as.upper[j]),
                             certify_mean_level(as.trace[j], as.shift[j], c.band, opts.reflect),
                             BoundReport{}};
        ReflectedCurve view{cs.shift, cs.regulator, {}, cs.loss_trace, cs.mean_level,
                            cs.lower_operator, cs.upper_operator, cs.certificate};
        cs.apriori = apriori_R_bound(engine, view, cs.unreflected, c.loss, c.band);
        result.certified = result.certified && cs.certificate.passed(opts.reflect) && cs.apriori.passed();
        result.components.push_back(std::move(cs));
    }
    result.label = result.certified ? "certified" : "uncertified";
    return result;
}

}  // namespace

DMRSolution picard_solve(const DMRProblem& problem, const PicardOptions& opts) {
    if (problem.regime == Regime::quadratic_unbounded) {
        throw InvalidInput("picard: the quadratic_unbounded regime needs truncated_solve");
    }
    if (problem.dimension() != 1) throw InvalidInput("picard: scalar solve expects one component");
    return solve_system(problem, opts);
}

DMRSolution multidim_solve(const DMRProblem& problem, const PicardOptions& opts) {
    if (problem.regime == Regime::quadratic_unbounded) {
        throw InvalidInput("picard: the quadratic_unbounded regime needs truncated_solve");
    }
    if (problem.dimension() < 2) throw InvalidInput("multidim: expects at least two components");
    return solve_system(problem, opts);
}

double fixed_point_residual(const DMRProblem& problem, const DMRSolution& solution, const PicardOptions& opts) {
    std::vector<Trajectory> frozen;
    std::vector<StateField> terminals;
    for (std::size_t j = 0; j < solution.components.size(); ++j) {
        frozen.push_back(solution.components[j].values);
        terminals.push_back(problem.components[j].terminal);
    }
    SweepResult next = sweep(problem, 0, terminals, frozen, opts);
    return sweep_distance(problem.engine, next.reflected, frozen);
}

double solution_distance(const GEngine& engine, const DMRSolution& a, const DMRSolution& b) {
    if (a.components.size() != b.components.size()) throw InvalidInput("distance: dimension mismatch");
    double d = 0.0;
    for (std::size_t j = 0; j < a.components.size(); ++j) {
        const auto& ya = a.components[j].values;
        const auto& yb = b.components[j].values;
        if (ya.size() != yb.size()) throw InvalidInput("distance: grid mismatch");
        for (std::size_t k = 0; k < ya.size(); ++k) d = std::max(d, field_distance(engine, ya[k], yb[k]));
    }
    return d;
}

TruncationReport truncated_solve(const DMRProblem& problem, std::span<const double> schedule, const PicardOptions& opts) {
    if (problem.regime != Regime::quadratic_unbounded) {
        throw InvalidInput("truncation: only for the quadratic_unbounded regime");
    }
    if (schedule.size() < 2) throw InvalidInput("truncation: schedule needs at least two levels");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (!(schedule[k] > 0.0) || (k > 0 && !(schedule[k] > schedule[k - 1]))) {
            throw InvalidInput("truncation: levels must be positive and increasing");
        }
    }
    TruncationReport rep;
    std::optional<DMRSolution> previous;
    for (double m : schedule) {
        DMRProblem clipped{problem.engine, {}, Regime::quadratic_bounded};
        for (const Component& c : problem.components) {
            StateField terminal = c.terminal.map([m](double, double v) { return std::clamp(v, -m, m); });
            GeneratorSpec g = c.generator;
            const std::size_t dim = problem.components.size();
            g.fn = [f = c.generator.fn, m, dim](double t, std::span<const double> y, double z) {
                std::vector<double> zero(dim, 0.0);
                const double base = f(t, zero, 0.0);
                return f(t, y, z) - base + std::clamp(base, -m, m);
            };
            clipped.components.push_back(Component{std::move(terminal), std::move(g), c.loss, c.band});
        }
        DMRSolution sol = solve_system(clipped, opts);
        rep.levels.push_back(m);
        if (previous) rep.distances.push_back(solution_distance(problem.engine, *previous, sol));
        previous = std::move(sol);
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < rep.distances.size(); ++k) {
        const bool idle = rep.distances[k] <= 1e-12 && rep.distances[k - 1] <= 1e-12;
        decreasing = decreasing && (idle || rep.distances[k] < rep.distances[k - 1]);
    }
    if (!decreasing) {
        std::ostringstream msg;
        msg << "truncation: distances do not decrease along the schedule:";
        for (double d : rep.distances) msg << ' ' << d;
        throw InconclusiveError(msg.str());
    }
    rep.solution = std::move(*previous);
    rep.solution.label = "stabilized";
    return rep;
}

}  // namespace dmrg
