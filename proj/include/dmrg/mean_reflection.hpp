#pragma once

// Reflection of the expectation level of a process between two barriers
// applied through a running loss function.
//
//   Hbar(t, x, X) = E[ loss(t, x + X - E[X]) ]
//   L_t(X), U_t(X): the x solving Hbar(t, x, X) = l_t (resp. u_t)
//   Y_t = Ybar_t + rho_t with rho_t = R_T - R_t deterministic.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmrg/core_grid.hpp"
#include "dmrg/gexpectation.hpp"
#include "dmrg/skorokhod.hpp"

namespace dmrg {

class LossFunction {
public:
    using Fn = std::function<double(double t, double y)>;

    /// slope_lower <= (loss(t,y') - loss(t,y)) / (y' - y) <= slope_upper,
    /// |loss(t,y)| <= growth (1 + |y|).
    LossFunction(Fn fn, double slope_lower, double slope_upper, double growth, std::string name);

    static LossFunction identity();
    /// y -> scale * y + offset, scale > 0.
    static LossFunction affine(double scale, double offset);
    /// y -> y + amplitude * sin(y), 0 <= amplitude < 1.
    static LossFunction sine(double amplitude);

    double operator()(double t, double y) const { return fn_(t, y); }
    double slope_lower() const noexcept { return c_lower_; }
    double slope_upper() const noexcept { return c_upper_; }
    double growth() const noexcept { return growth_; }
    const std::string& name() const noexcept { return name_; }

    /// Set for losses of the form scale * y + offset (no time dependence).
    std::optional<std::pair<double, double>> affine_form() const noexcept { return affine_; }

    /// Samples monotonicity, the slope bounds and the growth bound on
    /// [-y_range, y_range] at every node; throws InvalidInput on a breach.
    void validate(const TimeGrid& grid, double y_range, int samples = 41) const;

    /// loss(t, y_small) < inf l and sup u < loss(t, y_large) at every node;
    /// throws ConfigurationError otherwise.
    void check_range(const Band& band, double y_small, double y_large) const;

    /// Scalar inverse y with loss(t, y) = target (bisection).
    double inverse(double t, double target) const;

private:
    Fn fn_;
    double c_lower_;
    double c_upper_;
    double growth_;
    std::string name_;
    std::optional<std::pair<double, double>> affine_;
};

/// Centring used inside Hbar: `upper` subtracts E[X], `lower` adds E[-X].
enum class Construction { upper, lower };

/// Hbar(t, ., X) for one fixed (t, X). Caches the centring.
class HbarEvaluator {
public:
    HbarEvaluator(const GEngine& engine, const LossFunction& loss, const StateField& field,
                  Construction construction = Construction::upper);

    double operator()(double x) const;
    /// Centring constant m: E[X] or -E[-X].
    double centre() const noexcept { return centre_; }
    int evaluations() const noexcept { return evaluations_; }

private:
    const GEngine& engine_;
    const LossFunction& loss_;
    const StateField& field_;
    double centre_;
    double mean_;  // E[X]
    mutable int evaluations_ = 0;
};

double hbar_mean(const GEngine& engine, const LossFunction& loss, double t, double x, const StateField& field,
                 Construction construction = Construction::upper);

struct InversionResult {
    double root;
    double residual;  ///< |Hbar(root) - target|
    int probes;
};

/// Solves Hbar(t, x, X) = target by a slope-certified bracket and bisection.
/// `probe` seeds the bracket (defaults to the target itself).
InversionResult invert_barrier(const HbarEvaluator& hbar, const LossFunction& loss, double target,
                               std::optional<double> probe = std::nullopt);
InversionResult invert_barrier(const GEngine& engine, const LossFunction& loss, double t,
                               const StateField& field, double target,
                               Construction construction = Construction::upper);

struct ReflectOptions {
    Construction construction = Construction::upper;
    double containment_eps = 1e-6;  ///< band slack for the expectation trace
    double admissibility_tol = 1e-6;
    double minimality_tol = 1e-8;  ///< matches the barrier inversion tolerance
};

struct MeanLevelCertificate {
    double lower_sum = 0.0;  ///< max window sum of (E[loss(Y)] - l) dR
    double upper_sum = 0.0;  ///< max window sum of (E[loss(Y)] - u) dR
    double sign_violation = 0.0;
    double containment_violation = 0.0;  ///< worst excursion of the trace outside [l, u]
    double flat_violation = 0.0;  ///< worst |dR| at nodes strictly inside the band
    bool passed(const ReflectOptions& opts) const noexcept;
};

struct ReflectedCurve {
    GridCurve shift;       ///< rho_t = R_T - R_t
    BVPath regulator;      ///< R
    std::vector<StateField> fields;  ///< Y_t = Ybar_t + rho_t
    GridCurve loss_trace;  ///< E[loss(t, Y_t)]
    GridCurve mean_level;  ///< centre of Ybar_t (E[Ybar_t] for the upper construction)
    GridCurve lower_operator;  ///< L_t(Ybar_t)
    GridCurve upper_operator;  ///< U_t(Ybar_t)
    MeanLevelCertificate certificate;
};

/// Reflects the whole trajectory Ybar (one field per time node).
ReflectedCurve reflect_sublinear(const GEngine& engine, const LossFunction& loss, const Band& band,
                                 std::span<const StateField> trajectory, const ReflectOptions& opts = {});

/// Reflection restricted to nodes [first, first + trajectory.size() - 1],
/// anchored at the last node of the range. Values outside the range are
/// unused. Returns the local shift rho (zero at the range end), the loss
/// trace and operator bounds for the range only.
struct RangeReflection {
    std::vector<double> shift;
    std::vector<double> loss_trace;
    std::vector<double> mean_level;
    std::vector<double> lower_operator;
    std::vector<double> upper_operator;
};
RangeReflection reflect_range(const GEngine& engine, const LossFunction& loss, const Band& band, int first,
                              std::span<const StateField> trajectory, const ReflectOptions& opts = {});

/// Mean-level minimality, containment and flatness of a reflected trace.
MeanLevelCertificate certify_mean_level(std::span<const double> loss_trace, std::span<const double> shift,
                                        const Band& band, const ReflectOptions& opts);

struct BoundReport {
    double worst_margin;  ///< min over nodes of (rhs - lhs)
    int worst_node;
    std::vector<double> lhs;
    std::vector<double> rhs;
    bool passed(double slack = 1e-6) const noexcept { return worst_margin >= -slack; }
};

/// |R_T - R_t| <= (1 + 2 c_up / c_lo) sup_{s>=t} E|Ybar_s| + sup_{s>=t} max(|L_s(0)|, |U_s(0)|)
BoundReport apriori_R_bound(const GEngine& engine, const ReflectedCurve& curve, std::span<const StateField> trajectory,
                            const LossFunction& loss, const Band& band);

struct ReflectionInputs {
    const LossFunction& loss;
    const Band& band;
    std::span<const StateField> trajectory;
};

/// Stability of the shift between two reflected problems with common
/// loss slope constants.
BoundReport stability_check(const GEngine& engine, const ReflectedCurve& first, const ReflectionInputs& first_inputs,
                            const ReflectedCurve& second, const ReflectionInputs& second_inputs);

}  // namespace dmrg
