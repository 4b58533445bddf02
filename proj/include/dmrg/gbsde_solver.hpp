#pragma once

// Markovian G-BSDE  Y_t = Phi(B_T) + int_t^T f(s, Y_s, Z_s) ds - int_t^T Z dB - (K_T - K_t)
// solved through u_t + G(u_xx) + f(t, u, u_x) = 0 by explicit backward marching.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dmrg/core_grid.hpp"
#include "dmrg/gexpectation.hpp"

namespace dmrg {

enum class GeneratorKind { lipschitz, quadratic };

struct GeneratorSpec {
    /// f(t, y, z); y holds every component of the state (size 1 when scalar).
    using Fn = std::function<double(double t, std::span<const double> y, double z)>;

    Fn fn;
    GeneratorKind kind = GeneratorKind::lipschitz;
    double lipschitz = 0.0;  ///< L for the lipschitz kind
    double lambda = 0.0;     ///< y-Lipschitz constant for the quadratic kind
    double gamma = 0.0;      ///< z-growth constant for the quadratic kind
    std::optional<GridCurve> base_bound;  ///< alpha_t in the growth envelope

    static GeneratorSpec zero();
    static GeneratorSpec lipschitz_kind(Fn fn, double constant);
    static GeneratorSpec quadratic_kind(Fn fn, double lambda, double gamma);
    /// Wraps f(t, y, z) with scalar y.
    static Fn scalar(std::function<double(double, double, double)> f);

    double operator()(double t, std::span<const double> y, double z) const { return fn(t, y, z); }
    const char* kind_name() const noexcept { return kind == GeneratorKind::lipschitz ? "lipschitz" : "quadratic"; }

    /// Checks the increment and growth envelopes on sampled (t, y, z) tuples
    /// with |y|, |z| <= range; throws InvalidInput naming the failed envelope.
    void validate(const TimeGrid& grid, int components, double range, int samples = 9) const;
};

struct GBSDEOptions {
    double z_clip = 50.0;     ///< quadratic kind only
    double ceiling = 1e6;     ///< |u| above this is a divergence
    int max_halvings = 12;    ///< quadratic kind: sub-step splits on fast growth
    double growth_trigger = 0.25;  ///< split when one update exceeds this times (1 + max|u|)
};

/// Frozen state seen by the generator: trajectories[c][k] is component c at
/// node first + k. When absent the generator sees the solution itself.
struct FrozenState {
    std::span<const std::vector<StateField>> trajectories;
};

struct GBSDESolution {
    int first = 0;  ///< first node covered
    std::vector<StateField> values;     ///< u at nodes first..last
    std::vector<StateField> gradients;  ///< u_x at the same nodes
    long substeps = 0;
    long clip_events = 0;
    long halvings = 0;

    int last() const noexcept { return first + static_cast<int>(values.size()) - 1; }
    const StateField& value(int node) const { return values.at(static_cast<std::size_t>(node - first)); }
    const StateField& gradient(int node) const { return gradients.at(static_cast<std::size_t>(node - first)); }
};

/// Solves backward from `terminal` (at a grid node) down to node `first`.
/// With `frozen`, the trajectories must cover the same node range.
GBSDESolution solve_gbsde(const GEngine& engine, const StateField& terminal, const GeneratorSpec& f,
                          const GBSDEOptions& opts = {}, std::optional<FrozenState> frozen = std::nullopt,
                          int first = 0);

enum class VolatilityChoice { constant, argmax };

struct KDiagnostic {
    double mean_terminal;   ///< mean of K_T - K_0
    double se_terminal;
    double worst_step_excess;  ///< max over steps of mean dK - 3 SE (<= 0 expected)
    bool nonincreasing_in_mean;  ///< mean K_T <= 3 SE and every step passes
    bool flat;                   ///< |mean K_T| <= 3 SE
};

/// Simulates B with d<B> = sigma^2 dt and rebuilds K from the solution fields.
/// `argmax` picks sigma_upper where u_xx >= 0 and sigma_lower elsewhere.
KDiagnostic pathwise_K_diagnostic(const GEngine& engine, const GBSDESolution& sol, const GeneratorSpec& f,
                                  VolatilityChoice choice, double sigma, int n_paths, std::uint64_t seed);

struct MarginReport {
    double worst_margin;  ///< relative: min (rhs - lhs) / rhs
    int worst_node;
    bool passed(double slack) const noexcept { return worst_margin >= -slack; }
};

/// exp(c |Y_t|) <= E_t[exp(c (|xi| + int_t^T beta ds))] with c = p kappa / sigma_lower^2,
/// under |f(t, y, z)| <= beta_t + kappa/2 |z|^2 (checked on the solution's own tuples).
MarginReport exp_bound_check(const GEngine& engine, const GBSDESolution& sol, const GeneratorSpec& f,
                             const GridCurve& beta, double kappa, double p);

struct StabilityConstant {
    double constant;  ///< max over nodes and inner states of lhs / rhs
    double max_lhs;
};

/// |Y1 - Y2|^alpha against E_t[|xi1 - xi2|^alpha + (T - t)^(alpha - 1) int_t^T h^alpha ds]
/// with h = |f1 - f2| evaluated along the second solution.
StabilityConstant data_stability_check(const GEngine& engine, const GBSDESolution& first,
                                           const GBSDESolution& second, const GeneratorSpec& f1,
                                           const GeneratorSpec& f2, double alpha);

}  // namespace dmrg
