#include "dmrg/gbsde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dmrg/errors.hpp"

namespace dmrg {

GeneratorSpec GeneratorSpec::zero() {
    return lipschitz_kind([](double, std::span<const double>, double) { return 0.0; }, 0.0);
}

GeneratorSpec GeneratorSpec::lipschitz_kind(Fn fn, double constant) {
    if (!(constant >= 0.0)) throw InvalidInput("generator: Lipschitz constant must be non-negative");
    GeneratorSpec g;
    g.fn = std::move(fn);
    g.kind = GeneratorKind::lipschitz;
    g.lipschitz = constant;
    return g;
}

GeneratorSpec GeneratorSpec::quadratic_kind(Fn fn, double lambda, double gamma) {
    if (!(lambda >= 0.0) || !(gamma > 0.0)) throw InvalidInput("generator: need lambda >= 0 and gamma > 0");
    GeneratorSpec g;
    g.fn = std::move(fn);
    g.kind = GeneratorKind::quadratic;
    g.lambda = lambda;
    g.gamma = gamma;
    return g;
}

GeneratorSpec::Fn GeneratorSpec::scalar(std::function<double(double, double, double)> f) {
    return [f = std::move(f)](double t, std::span<const double> y, double z) { return f(t, y[0], z); };
}

void GeneratorSpec::validate(const TimeGrid& grid, int components, double range, int samples) const {
    if (!fn) throw InvalidInput("generator: empty evaluator");
    if (components < 1) throw InvalidInput("generator: need at least one component");
    if (base_bound && !(base_bound->grid() == grid)) throw InvalidInput("generator: base bound on another grid");
    const double tol = 1e-9;
    const double step = samples > 1 ? 2.0 * range / (samples - 1) : 0.0;
    std::vector<int> idx(static_cast<std::size_t>(components) + 1, 0);  // last slot indexes z
    std::vector<double> y(static_cast<std::size_t>(components)), y2(y.size());
    auto coord = [&](int k) { return -range + step * k; };
    for (int node = 0; node < grid.size(); ++node) {
        const double t = grid.node(node);
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            for (int c = 0; c < components; ++c) y[static_cast<std::size_t>(c)] = coord(idx[static_cast<std::size_t>(c)]);
            const double z = coord(idx.back());
            const double v = fn(t, y, z);
            if (!std::isfinite(v)) throw InvalidInput("generator: non-finite value");
            if (kind == GeneratorKind::quadratic && base_bound) {
                double ynorm = 0.0;
                for (double c : y) ynorm += std::abs(c);
                if (std::abs(v) > (*base_bound)[node] + 0.5 * gamma + lambda * ynorm + 1.5 * gamma * z * z + tol) {
                    throw InvalidInput("generator: quadratic growth envelope violated");
                }
            }
            // neighbours one lattice step away in each coordinate
            for (std::size_t d = 0; d < idx.size(); ++d) {
                if (idx[d] + 1 >= samples) continue;
                y2 = y;
                double z2 = z, dy = 0.0, dz = 0.0;
                if (d + 1 == idx.size()) {
                    z2 = z + step;
                    dz = step;
                } else {
                    y2[d] += step;
                    dy = step;
                }
                const double diff = std::abs(fn(t, y2, z2) - v);
                const double bound = kind == GeneratorKind::lipschitz
                                         ? lipschitz * (dy + dz)
                                         : lambda * dy + gamma * (1.0 + std::abs(z) + std::abs(z2)) * dz;
                if (diff > bound + tol) {
                    throw InvalidInput(std::string("generator: ") + kind_name() + " increment envelope violated at t = " +
                                       std::to_string(t));
                }
            }
            std::size_t d = 0;
            while (d < idx.size() && ++idx[d] == samples) idx[d++] = 0;
            if (d == idx.size()) break;
        }
    }
}

namespace {

class Marcher {
public:
    Marcher(const GEngine& engine, const GeneratorSpec& f, const GBSDEOptions& opts, std::optional<FrozenState> frozen,
            GBSDESolution& sol)
        : engine_(engine), f_(f), opts_(opts), frozen_(frozen), sol_(sol) {
        const std::size_t m = static_cast<std::size_t>(engine.space().size());
        d2_.resize(m);
        d1_.resize(m);
        incr_.resize(m);
        y_.resize(frozen ? frozen->trajectories.size() : 1);
    }

    // One explicit step of length h starting at time `time` (moving backward).
    // `lo`/`hi` index the frozen node pair bracketing the step, `w_hi` weights hi.
    void step(std::vector<double>& u, double h, double time, std::size_t lo, double w_hi, int depth) {
        const double dx = engine_.space().dx();
        second_difference(u, dx, d2_);
        first_difference(u, dx, d1_);
        const bool quadratic = f_.kind == GeneratorKind::quadratic;
        double max_incr = 0.0, max_u = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            double z = d1_[j];
            if (quadratic && std::abs(z) > opts_.z_clip) {
                z = std::copysign(opts_.z_clip, z);
                ++sol_.clip_events;
            }
            if (frozen_) {
                for (std::size_t c = 0; c < y_.size(); ++c) {
                    const auto& traj = frozen_->trajectories[c];
                    y_[c] = (1.0 - w_hi) * traj[lo][static_cast<int>(j)] + w_hi * traj[lo + 1][static_cast<int>(j)];
                }
            } else {
                y_[0] = u[j];
            }
            incr_[j] = h * (g_function(d2_[j], engine_.band()) + f_(time, y_, z));
            max_incr = std::max(max_incr, std::abs(incr_[j]));
            max_u = std::max(max_u, std::abs(u[j]));
        }
        if (quadratic && depth < opts_.max_halvings && max_incr > opts_.growth_trigger * (1.0 + max_u)) {
            ++sol_.halvings;
            const double half = 0.5 * h;
            const double dt = engine_.time().dt();
            step(u, half, time, lo, w_hi, depth + 1);
            step(u, half, time - half, lo, std::max(0.0, w_hi - half / dt), depth + 1);
            return;
        }
        ++sol_.substeps;
        for (std::size_t j = 0; j < u.size(); ++j) {
            u[j] += incr_[j];
            if (!(std::abs(u[j]) <= opts_.ceiling)) {
                throw DivergenceError(std::string(f_.kind_name()) + " generator: solution left the ceiling " +
                                      std::to_string(opts_.ceiling) + " at t = " + std::to_string(time));
            }
        }
    }

private:
    const GEngine& engine_;
    const GeneratorSpec& f_;
    const GBSDEOptions& opts_;
    std::optional<FrozenState> frozen_;
    GBSDESolution& sol_;
    std::vector<double> d2_, d1_, incr_, y_;
};

StateField gradient_of(const StateField& u) {
    std::vector<double> d(u.values().size());
    first_difference(u.values(), u.grid().dx(), d);
    return StateField(u.grid(), u.time(), std::move(d));
}

}  // namespace

GBSDESolution solve_gbsde(const GEngine& engine, const StateField& terminal, const GeneratorSpec& f,
                          const GBSDEOptions& opts, std::optional<FrozenState> frozen, int first) {
    if (!f.fn) throw InvalidInput("solve_gbsde: empty generator");
    if (!(terminal.grid() == engine.space())) throw InvalidInput("solve_gbsde: terminal on a different spatial grid");
    const TimeGrid& grid = engine.time();
    const int last = grid.index_of(terminal.time());
    if (first < 0 || first > last) throw InvalidInput("solve_gbsde: first node after the terminal node");
    const std::size_t count = static_cast<std::size_t>(last - first) + 1;
    if (frozen) {
        if (frozen->trajectories.empty()) throw InvalidInput("solve_gbsde: empty frozen state");
        for (const auto& traj : frozen->trajectories) {
            if (traj.size() != count) throw InvalidInput("solve_gbsde: frozen trajectory does not cover the node range");
            for (const auto& fld : traj) {
                if (!(fld.grid() == engine.space())) throw InvalidInput("solve_gbsde: frozen field on another grid");
            }
        }
    }

    GBSDESolution sol;
    sol.first = first;
    sol.values.reserve(count);
    sol.gradients.reserve(count);
    std::vector<StateField> values, gradients;
    std::vector<double> u(terminal.values().begin(), terminal.values().end());
    values.push_back(terminal);
    gradients.push_back(gradient_of(terminal));

    Marcher marcher(engine, f, opts, frozen, sol);
    const int n_sub = engine.substeps();
    const double h = engine.dtau();
    for (int node = last - 1; node >= first; --node) {
        const double t_hi = grid.node(node + 1);
        const std::size_t lo = static_cast<std::size_t>(node - first);
        for (int s = 0; s < n_sub; ++s) {
            const double w_hi = 1.0 - static_cast<double>(s) / n_sub;
            marcher.step(u, h, t_hi - s * h, lo, w_hi, 0);
        }
        values.emplace_back(engine.space(), grid.node(node), u);
        gradients.push_back(gradient_of(values.back()));
    }
    sol.values.assign(std::make_move_iterator(values.rbegin()), std::make_move_iterator(values.rend()));
    sol.gradients.assign(std::make_move_iterator(gradients.rbegin()), std::make_move_iterator(gradients.rend()));
    return sol;
}

KDiagnostic pathwise_K_diagnostic(const GEngine& engine, const GBSDESolution& sol, const GeneratorSpec& f,
                                  VolatilityChoice choice, double sigma, int n_paths, std::uint64_t seed) {
    const VolatilityBand& band = engine.band();
    if (choice == VolatilityChoice::constant && !band.contains(sigma)) {
        throw InvalidInput("K diagnostic: sigma " + std::to_string(sigma) + " outside the volatility band");
    }
    if (n_paths < 2) throw InvalidInput("K diagnostic: need at least two paths");
    const TimeGrid& grid = engine.time();
    const int steps = sol.last() - sol.first;
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);

    std::vector<StateField> curvature;
    for (const auto& v : sol.values) {
        std::vector<double> d2(v.values().size());
        second_difference(v.values(), v.grid().dx(), d2);
        curvature.emplace_back(v.grid(), v.time(), std::move(d2));
    }

    std::vector<double> inc_sum(static_cast<std::size_t>(steps), 0.0), inc_sq(inc_sum.size(), 0.0);
    double kt_sum = 0.0, kt_sq = 0.0;
    const std::uint32_t seed_lo = static_cast<std::uint32_t>(seed), seed_hi = static_cast<std::uint32_t>(seed >> 32);
    std::normal_distribution<double> normal(0.0, 1.0);
    double y[1];
    for (int p = 0; p < n_paths; ++p) {
        std::seed_seq seq{seed_lo, seed_hi, static_cast<std::uint32_t>(p)};
        std::mt19937_64 rng(seq);
        normal.reset();
        double b = 0.0, k = 0.0;
        for (int s = 0; s < steps; ++s) {
            const std::size_t i = static_cast<std::size_t>(s);
            const double yi = sol.values[i].interpolate(b);
            double z = sol.gradients[i].interpolate(b);
            if (f.kind == GeneratorKind::quadratic) z = std::clamp(z, -50.0, 50.0);
            double vol = sigma;
            if (choice == VolatilityChoice::argmax) {
                vol = curvature[i].interpolate(b) >= 0.0 ? band.sigma_upper : band.sigma_lower;
            }
            y[0] = yi;
            const double drift = f(grid.node(sol.first + s), y, z);
            const double db = vol * sqdt * normal(rng);
            b += db;
            const double dk = sol.values[i + 1].interpolate(b) - yi + drift * dt - z * db;
            k += dk;
            inc_sum[i] += dk;
            inc_sq[i] += dk * dk;
        }
        kt_sum += k;
        kt_sq += k * k;
    }
    const double n = n_paths;
    auto se = [n](double sum, double sq) {
        const double mean = sum / n;
        return std::sqrt(std::max(0.0, (sq / n - mean * mean) / (n - 1.0)));
    };
    KDiagnostic rep{};
    rep.mean_terminal = kt_sum / n;
    rep.se_terminal = se(kt_sum, kt_sq);
    rep.worst_step_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inc_sum.size(); ++i) {
        rep.worst_step_excess = std::max(rep.worst_step_excess, inc_sum[i] / n - 3.0 * se(inc_sum[i], inc_sq[i]));
    }
    if (inc_sum.empty()) rep.worst_step_excess = 0.0;
    // a constant solution gives exactly zero increments; allow rounding
    const double floor = 1e-12;
    rep.nonincreasing_in_mean = rep.mean_terminal <= 3.0 * rep.se_terminal + floor && rep.worst_step_excess <= floor;
    rep.flat = std::abs(rep.mean_terminal) <= 3.0 * rep.se_terminal + floor;
    return rep;
}

namespace {

bool inner_state(const SpatialGrid& g, int j) { return std::abs(g.x(j)) <= 0.5 * g.x_max(); }

}  // namespace

MarginReport exp_bound_check(const GEngine& engine, const GBSDESolution& sol, const GeneratorSpec& f,
                             const GridCurve& beta, double kappa, double p) {
    const TimeGrid& grid = engine.time();
    if (!(beta.grid() == grid)) throw InvalidInput("exp bound: beta on another grid");
    if (!(kappa > 0.0) || !(p >= 1.0)) throw InvalidInput("exp bound: need kappa > 0 and p >= 1");
    const SpatialGrid& space = engine.space();
    double y[1];
    for (int node = sol.first; node <= sol.last(); ++node) {
        if (beta[node] < 0.0) throw InvalidInput("exp bound: beta must be non-negative");
        const StateField& u = sol.value(node);
        const StateField& z = sol.gradient(node);
        for (int j = 0; j < space.size(); ++j) {
            y[0] = u[j];
            if (std::abs(f(grid.node(node), y, z[j])) > beta[node] + 0.5 * kappa * z[j] * z[j] + 1e-12) {
                throw InvalidInput("exp bound: generator exceeds beta + kappa/2 |z|^2 on the solution");
            }
        }
    }
    const double c = p * kappa / (engine.band().sigma_lower * engine.band().sigma_lower);
    const StateField& terminal = sol.value(sol.last());
    StateField w = terminal.map([c](double, double v) { return std::exp(c * std::abs(v)); });
    MarginReport rep{std::numeric_limits<double>::infinity(), sol.last()};
    double integral = 0.0;
    for (int node = sol.last(); node >= sol.first; --node) {
        if (node < sol.last()) {
            integral += 0.5 * grid.dt() * (beta[node] + beta[node + 1]);
            w = engine.solve_gheat(w, grid.node(node));
        }
        const double factor = std::exp(c * integral);
        const StateField& u = sol.value(node);
        for (int j = 0; j < space.size(); ++j) {
            if (!inner_state(space, j)) continue;
            const double rhs = factor * w[j];
            const double lhs = std::exp(c * std::abs(u[j]));
            const double margin = (rhs - lhs) / rhs;
            if (margin < rep.worst_margin) {
                rep.worst_margin = margin;
                rep.worst_node = node;
            }
        }
    }
    return rep;
}

StabilityConstant data_stability_check(const GEngine& engine, const GBSDESolution& first,
                                           const GBSDESolution& second, const GeneratorSpec& f1,
                                           const GeneratorSpec& f2, double alpha) {
    if (first.first != second.first || first.last() != second.last()) {
        throw InvalidInput("data stability check: solutions cover different node ranges");
    }
    if (!(alpha > 1.0)) throw InvalidInput("data stability check: alpha must exceed 1");
    const TimeGrid& grid = engine.time();
    const SpatialGrid& space = engine.space();
    const int last = first.last();
    const std::size_t m = static_cast<std::size_t>(space.size());

    // h^alpha along the second solution, one field per node
    std::vector<std::vector<double>> source;
    double y[1];
    for (int node = first.first; node <= last; ++node) {
        const StateField& u = second.value(node);
        const StateField& z = second.gradient(node);
        std::vector<double> h(m);
        for (std::size_t j = 0; j < m; ++j) {
            y[0] = u[static_cast<int>(j)];
            const double t = grid.node(node);
            h[j] = std::pow(std::abs(f1(t, y, z[static_cast<int>(j)]) - f2(t, y, z[static_cast<int>(j)])), alpha);
        }
        source.push_back(std::move(h));
    }
    std::vector<double> xi_hat(m);
    for (std::size_t j = 0; j < m; ++j) {
        xi_hat[j] = std::pow(std::abs(first.value(last)[static_cast<int>(j)] - second.value(last)[static_cast<int>(j)]), alpha);
    }

    StabilityConstant out{0.0, 0.0};
    std::vector<double> v(m), d2(m);
    const int n_sub = engine.substeps();
    const double h = engine.dtau();
    for (int target = first.first; target <= last; ++target) {
        // v_t + G(v_xx) + (T - t_target)^(alpha - 1) h^alpha = 0, v(T) = |xi_hat|^alpha
        const double weight = std::pow(grid.node(last) - grid.node(target), alpha - 1.0);
        v = xi_hat;
        for (int node = last - 1; node >= target; --node) {
            const auto& hi = source[static_cast<std::size_t>(node + 1 - first.first)];
            const auto& lo = source[static_cast<std::size_t>(node - first.first)];
            for (int s = 0; s < n_sub; ++s) {
                const double w_hi = 1.0 - static_cast<double>(s) / n_sub;
                second_difference(v, space.dx(), d2);
                for (std::size_t j = 0; j < m; ++j) {
                    const double src = w_hi * hi[j] + (1.0 - w_hi) * lo[j];
                    v[j] += h * (g_function(d2[j], engine.band()) + weight * src);
                }
            }
        }
        const StateField& u1 = first.value(target);
        const StateField& u2 = second.value(target);
        double rhs_scale = 0.0;
        for (double r : v) rhs_scale = std::max(rhs_scale, r);
        for (int j = 0; j < space.size(); ++j) {
            if (!inner_state(space, j)) continue;
            const double lhs = std::pow(std::abs(u1[j] - u2[j]), alpha);
            out.max_lhs = std::max(out.max_lhs, lhs);
            const double rhs = v[static_cast<std::size_t>(j)];
            if (rhs > 1e-12 * rhs_scale && rhs > 0.0) out.constant = std::max(out.constant, lhs / rhs);
        }
    }
    return out;
}

}  // namespace dmrg
