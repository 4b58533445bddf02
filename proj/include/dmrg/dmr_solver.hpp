#pragma once

// Picard solvers for the doubly mean-reflected G-BSDE
//
//   Y^j_t = Phi^j(B_T) + int_t^T f^j(s, Y_s, Z^j_s) ds - int_t^T Z^j dB - (K^j_T - K^j_t) + R^j_T - R^j_t
//   l^j_t <= E[loss^j(t, Y^j_t)] <= u^j_t,  R^j Skorokhod-minimal.
//
// Each sweep freezes Y in the generators, solves the unreflected equations
// and reflects the result.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmrg/gbsde_solver.hpp"
#include "dmrg/mean_reflection.hpp"

namespace dmrg {

enum class Regime { lipschitz, quadratic_bounded, quadratic_unbounded };
const char* regime_name(Regime r) noexcept;

struct Component {
    StateField terminal;
    GeneratorSpec generator;
    LossFunction loss;
    Band band;
};

struct DMRProblem {
    GEngine engine;
    std::vector<Component> components;
    Regime regime = Regime::lipschitz;

    /// Terminal admissibility, grid consistency, shared loss constants and
    /// the loss range condition over the spatial domain.
    void validate(double admissibility_tol = 1e-6) const;
    int dimension() const noexcept { return static_cast<int>(components.size()); }
};

struct PicardOptions {
    int max_iters = 50;
    double tol = 1e-8;
    std::optional<double> window;  ///< window length; global iteration when absent
    double initial = 0.0;          ///< constant initial guess for every field
    ReflectOptions reflect;
    GBSDEOptions gbsde;
};

struct ComponentSolution {
    std::vector<StateField> values;      ///< Y(t_i, .)
    std::vector<StateField> gradients;   ///< Z(t_i, .)
    std::vector<StateField> unreflected; ///< Ybar = Y - rho
    GridCurve shift;                     ///< rho_t = R_T - R_t
    BVPath regulator;
    GridCurve loss_trace;
    GridCurve mean_level;
    GridCurve lower_operator;
    GridCurve upper_operator;
    MeanLevelCertificate certificate;
    BoundReport apriori;
};

struct DMRSolution {
    std::vector<ComponentSolution> components;
    std::vector<double> history;  ///< sup_t E|Y^{k+1}_t - Y^k_t| per sweep
    int iterations = 0;           ///< sweeps that changed the solution by >= tol
    bool certified = false;       ///< every certificate passed
    std::string label;            ///< "certified", "uncertified" or "stabilized"

    /// Successive distance ratios d_{k+1} / d_k.
    std::vector<double> ratios() const;
};

/// Scalar solve (one component); rejects the quadratic_unbounded regime.
DMRSolution picard_solve(const DMRProblem& problem, const PicardOptions& opts = {});

/// Diagonal system with two or more components.
DMRSolution multidim_solve(const DMRProblem& problem, const PicardOptions& opts = {});

/// Distance moved by one extra sweep started from the returned solution.
double fixed_point_residual(const DMRProblem& problem, const DMRSolution& solution, const PicardOptions& opts = {});

/// sup over nodes and components of E|Y1_t - Y2_t|.
double solution_distance(const GEngine& engine, const DMRSolution& a, const DMRSolution& b);

struct TruncationReport {
    std::vector<double> levels;
    std::vector<double> distances;  ///< distance between solutions at consecutive levels
    DMRSolution solution;           ///< solution at the largest level, labelled "stabilized"
};

/// Clips the terminal value and the generator's base term at each level m and
/// solves the bounded problems. Throws InconclusiveError unless the distances
/// decrease along the schedule.
TruncationReport truncated_solve(const DMRProblem& problem, std::span<const double> schedule,
                                 const PicardOptions& opts = {});

/// (1 + C) L h with C = 1 + 2 c_up / c_lo: contraction factor of one Picard window.
double contraction_factor(const LossFunction& loss, double lipschitz, double window);

}  // namespace dmrg
