#pragma once

// Two-barrier Skorokhod maps on a time grid.
//
// Forward problem: x = xbar + k stays in [l, u], k acts only at the barriers.
// Backward problem: x_t = a + xbar_T - xbar_t + k_T - k_t, anchored at x_T = a.
//
// Both are evaluated through the explicit sup/inf formulas, once by direct
// O(N^2) transcription and once by an O(N) running-extremum recursion.
// oracle_skorokhod is an independent route (alternating one-sided
// reflections) used to cross-check the formulas.

#include <vector>

#include "dmrg/core_grid.hpp"

namespace dmrg {

enum class Direction { forward, backward };

struct SkorokhodSolution {
    GridCurve input;  ///< xbar
    GridCurve x;
    BVPath k;
    Direction direction = Direction::forward;
    double anchor = 0.0;  ///< terminal value a, backward problems only
};

SkorokhodSolution forward_skorokhod(const GridCurve& xbar, const Band& band);
/// Reference evaluation of the forward formula, O(N^2).
SkorokhodSolution forward_skorokhod_direct(const GridCurve& xbar, const Band& band);

SkorokhodSolution backward_skorokhod(const GridCurve& xbar, double anchor, const Band& band);
/// Reference evaluation of the backward formula, O(N^2).
SkorokhodSolution backward_skorokhod_direct(const GridCurve& xbar, double anchor, const Band& band);

/// Raw backward map on value arrays (continuous data), used by solvers that
/// work on sub-windows of a grid. Returns k_last - k_i for every index i;
/// x_i = anchor + xbar.back() - xbar[i] + result[i].
std::vector<double> backward_shift(std::span<const double> xbar, double anchor,
                                   std::span<const double> lower, std::span<const double> upper);

struct MinimalityReport {
    double lower_sum = 0.0;        ///< max over windows of the sum of (x - l) dk
    double upper_sum = 0.0;        ///< max over windows of the sum of (x - u) dk
    double sign_violation = 0.0;   ///< worst breach of the pointwise sign rule
    double decomposition_residual = 0.0;
    double containment_violation = 0.0;
    double magnitude = 0.0;  ///< max |xbar| + |k|_T, scales the residual bound
    double tol = 0.0;

    bool minimality_ok() const noexcept {
        return lower_sum <= tol && upper_sum <= tol && sign_violation <= tol;
    }
    bool passed() const noexcept {
        return minimality_ok() && decomposition_residual <= 1e-12 * (1.0 + magnitude) &&
               containment_violation <= 1e-10 * (1.0 + magnitude);
    }
};

/// Verifies decomposition, containment and minimality of a solution.
/// Backward solutions pair each increment with the left-limit value, forward
/// solutions with the right endpoint.
MinimalityReport check_minimality(const SkorokhodSolution& sol, const Band& band, double tol);

/// Same checks for raw arrays: increments dk[i] on (t_{i-1}, t_i], weights
/// w = x (pairing chosen by the caller).
struct SignedSums {
    double lower_sum;
    double upper_sum;
    double sign_violation;
};
SignedSums minimality_sums(std::span<const double> paired_x, std::span<const double> paired_l,
                           std::span<const double> paired_u, std::span<const double> dk,
                           double tol);

struct OracleResult {
    SkorokhodSolution solution;
    int sweeps = 0;
};

/// Alternating one-sided reflection fixpoint. Throws ConvergenceError if the
/// sup-norm change between sweeps is still >= tol after max_iters sweeps.
OracleResult oracle_skorokhod(const GridCurve& xbar, const Band& band, int max_iters = 100000,
                              double tol = 1e-13);

/// Backward oracle through time reversal of the forward oracle.
OracleResult oracle_backward_skorokhod(const GridCurve& xbar, double anchor, const Band& band,
                                       int max_iters = 100000, double tol = 1e-13);

}  // namespace dmrg
