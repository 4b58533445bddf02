#include "dmrg/mean_reflection.hpp"

#include <algorithm>
#include <cmath>

#include "dmrg/errors.hpp"

namespace dmrg {

LossFunction::LossFunction(Fn fn, double slope_lower, double slope_upper, double growth, std::string name)
    : fn_(std::move(fn)), c_lower_(slope_lower), c_upper_(slope_upper), growth_(growth), name_(std::move(name)) {
    if (!fn_) throw InvalidInput("loss function: empty evaluator");
    if (!(slope_lower > 0.0) || !(slope_upper >= slope_lower) || !std::isfinite(slope_upper)) {
        throw InvalidInput("loss function: need 0 < c_lower <= c_upper < inf");
    }
    if (!(growth > 0.0) || !std::isfinite(growth)) throw InvalidInput("loss function: growth constant must be positive");
}

LossFunction LossFunction::identity() {
    LossFunction f([](double, double y) { return y; }, 1.0, 1.0, 1.0, "identity");
    f.affine_ = std::make_pair(1.0, 0.0);
    return f;
}

LossFunction LossFunction::affine(double scale, double offset) {
    if (!(scale > 0.0)) throw InvalidInput("affine loss: scale must be positive");
    LossFunction f([scale, offset](double, double y) { return scale * y + offset; }, scale, scale,
                   std::max(scale, std::abs(offset)), "affine");
    f.affine_ = std::make_pair(scale, offset);
    return f;
}

LossFunction LossFunction::sine(double amplitude) {
    if (!(amplitude >= 0.0 && amplitude < 1.0)) throw InvalidInput("sine loss: amplitude must lie in [0, 1)");
    return LossFunction([amplitude](double, double y) { return y + amplitude * std::sin(y); }, 1.0 - amplitude,
                        1.0 + amplitude, 1.0, "sine");
}

void LossFunction::validate(const TimeGrid& grid, double y_range, int samples) const {
    const double tol = 1e-9;
    for (double t : grid.nodes()) {
        double prev_y = -y_range;
        double prev_v = fn_(t, prev_y);
        for (int k = 1; k < samples; ++k) {
            const double y = -y_range + 2.0 * y_range * k / (samples - 1);
            const double v = fn_(t, y);
            if (!std::isfinite(v)) throw InvalidInput("loss " + name_ + ": non-finite value");
            const double slope = (v - prev_v) / (y - prev_y);
            if (!(v > prev_v)) throw InvalidInput("loss " + name_ + ": not strictly increasing");
            if (slope < c_lower_ - tol || slope > c_upper_ + tol) {
                throw InvalidInput("loss " + name_ + ": slope outside [c_lower, c_upper]");
            }
            if (std::abs(v) > growth_ * (1.0 + std::abs(y)) + tol) {
                throw InvalidInput("loss " + name_ + ": linear growth bound violated");
            }
            prev_y = y;
            prev_v = v;
        }
    }
}

void LossFunction::check_range(const Band& band, double y_small, double y_large) const {
    for (int i = 0; i < band.grid().size(); ++i) {
        const double t = band.grid().node(i);
        if (!(fn_(t, y_small) < band.lower().min()) || !(band.upper().max() < fn_(t, y_large))) {
            throw ConfigurationError("loss " + name_ + ": range condition fails, the loss does not cover the band "
                                     "over the spatial domain");
        }
    }
}

double LossFunction::inverse(double t, double target) const {
    if (affine_) return (target - affine_->second) / affine_->first;
    const double h0 = fn_(t, 0.0);
    const double d = target - h0;
    double lo = d / c_upper_, hi = d / c_lower_;
    if (lo > hi) std::swap(lo, hi);
    for (int k = 0; k < 200 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++k) {
        const double mid = 0.5 * (lo + hi);
        (fn_(t, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

HbarEvaluator::HbarEvaluator(const GEngine& engine, const LossFunction& loss, const StateField& field,
                             Construction construction)
    : engine_(engine), loss_(loss), field_(field) {
    mean_ = engine.gexp(field);
    if (construction == Construction::upper) {
        centre_ = mean_;
    } else {
        centre_ = -engine.gexp(field.map([](double, double v) { return -v; }));
    }
}

double HbarEvaluator::operator()(double x) const {
    ++evaluations_;
    if (const auto aff = loss_.affine_form()) {
        return aff->first * (x + mean_ - centre_) + aff->second;
    }
    const double t = field_.time();
    const double shift = x - centre_;
    return engine_.gexp(field_.map([&](double, double v) { return loss_(t, shift + v); }));
}

double hbar_mean(const GEngine& engine, const LossFunction& loss, double t, double x, const StateField& field,
                 Construction construction) {
    if (engine.time().index_of(t) != engine.time().index_of(field.time())) {
        throw InvalidInput("hbar: field time differs from t");
    }
    return HbarEvaluator(engine, loss, field, construction)(x);
}

InversionResult invert_barrier(const HbarEvaluator& hbar, const LossFunction& loss, double target,
                               std::optional<double> probe) {
    constexpr int budget = 60;
    const double tol = 1e-8 * std::max(1.0, std::abs(target));
    const double x0 = probe.value_or(target);
    int probes = 1;
    const double h0 = hbar(x0);
    const double d = target - h0;
    if (std::abs(d) <= tol) return {x0, std::abs(d), probes};

    // The root lies between x0 + d / c_upper and x0 + d / c_lower.
    double near = x0 + d / loss.slope_upper();
    double far = x0 + d / loss.slope_lower();
    const double h_near = hbar(near);
    ++probes;
    if (std::abs(h_near - target) <= tol) return {near, std::abs(h_near - target), probes};
    const double h_far = far == near ? h_near : hbar(far);
    ++probes;
    if (std::abs(h_far - target) <= tol) return {far, std::abs(h_far - target), probes};
    const bool up = d > 0.0;
    if ((up && (h_near > target || h_far < target)) || (!up && (h_near < target || h_far > target))) {
        throw ConfigurationError("barrier inversion: no bracket for target " + std::to_string(target) +
                                 "; the loss range condition fails numerically");
    }
    double below = up ? near : far;  // Hbar(below) < target
    double above = up ? far : near;
    double best = near, best_res = std::abs(h_near - target);
    while (probes < budget) {
        const double mid = 0.5 * (below + above);
        const double h = hbar(mid);
        ++probes;
        const double res = std::abs(h - target);
        if (res < best_res) {
            best = mid;
            best_res = res;
        }
        if (res <= tol) return {mid, res, probes};
        (h < target ? below : above) = mid;
        if (below == mid && above == mid) break;
    }
    throw ConvergenceError("barrier inversion: residual " + std::to_string(best_res) + " after " +
                               std::to_string(probes) + " probes at x = " + std::to_string(best),
                           {best_res});
}

InversionResult invert_barrier(const GEngine& engine, const LossFunction& loss, double t, const StateField& field,
                               double target, Construction construction) {
    if (engine.time().index_of(t) != engine.time().index_of(field.time())) {
        throw InvalidInput("barrier inversion: field time differs from t");
    }
    HbarEvaluator hbar(engine, loss, field, construction);
    return invert_barrier(hbar, loss, target);
}

bool MeanLevelCertificate::passed(const ReflectOptions& opts) const noexcept {
    return lower_sum <= opts.minimality_tol && upper_sum <= opts.minimality_tol &&
           sign_violation <= opts.minimality_tol && containment_violation <= opts.containment_eps &&
           flat_violation <= opts.minimality_tol;
}

RangeReflection reflect_range(const GEngine& engine, const LossFunction& loss, const Band& band, int first,
                              std::span<const StateField> trajectory, const ReflectOptions& opts) {
    const std::size_t n = trajectory.size();
    if (n == 0) throw InvalidInput("reflection: empty trajectory");
    const TimeGrid& grid = engine.time();
    if (!(grid == band.grid())) throw InvalidInput("reflection: band and engine on different time grids");
    if (first < 0 || first + static_cast<int>(n) > grid.size()) throw InvalidInput("reflection: node range out of grid");

    RangeReflection out;
    out.mean_level.resize(n);
    out.lower_operator.resize(n);
    out.upper_operator.resize(n);
    out.loss_trace.resize(n);
    std::vector<HbarEvaluator> evals;
    evals.reserve(n);
    std::optional<double> probe_l, probe_u;
    for (std::size_t k = 0; k < n; ++k) {
        const int node = first + static_cast<int>(k);
        if (grid.index_of(trajectory[k].time()) != node) throw InvalidInput("reflection: field time does not match its node");
        evals.emplace_back(engine, loss, trajectory[k], opts.construction);
        const HbarEvaluator& h = evals.back();
        out.mean_level[k] = h.centre();
        const double lo = invert_barrier(h, loss, band.lower()[node], probe_l).root;
        const double hi = invert_barrier(h, loss, band.upper()[node], probe_u).root;
        if (!(hi > lo)) {
            throw DegenerateBandError("reflection: effective barriers collapse at t = " + std::to_string(grid.node(node)));
        }
        out.lower_operator[k] = probe_l.emplace(lo);
        out.upper_operator[k] = probe_u.emplace(hi);
    }

    const std::size_t last = n - 1;
    const int last_node = first + static_cast<int>(last);
    const double anchor = out.mean_level[last];
    const double terminal = evals[last](anchor);
    if (terminal < band.lower()[last_node] - opts.admissibility_tol ||
        terminal > band.upper()[last_node] + opts.admissibility_tol) {
        throw InvalidInput("reflection: terminal expected loss " + std::to_string(terminal) + " outside [l_T, u_T]");
    }
    std::vector<double> lower = out.lower_operator, upper = out.upper_operator;
    lower[last] = std::min(lower[last], anchor);
    upper[last] = std::max(upper[last], anchor);
    std::vector<double> xbar(n);
    for (std::size_t k = 0; k < n; ++k) xbar[k] = -out.mean_level[k];
    out.shift = backward_shift(xbar, anchor, lower, upper);
    for (std::size_t k = 0; k < n; ++k) out.loss_trace[k] = evals[k](out.mean_level[k] + out.shift[k]);
    return out;
}

MeanLevelCertificate certify_mean_level(std::span<const double> loss_trace, std::span<const double> shift,
                                        const Band& band, const ReflectOptions& opts) {
    const std::size_t n = loss_trace.size();
    MeanLevelCertificate cert;
    std::vector<double> px(n, 0.0), pl(n, 0.0), pu(n, 0.0), dr(n > 0 ? n - 1 : 0);
    for (std::size_t i = 1; i < n; ++i) {
        px[i] = loss_trace[i - 1];
        pl[i] = band.lower()[static_cast<int>(i - 1)];
        pu[i] = band.upper()[static_cast<int>(i - 1)];
        dr[i - 1] = shift[i - 1] - shift[i];
        if (px[i] > pl[i] + opts.containment_eps && px[i] < pu[i] - opts.containment_eps) {
            cert.flat_violation = std::max(cert.flat_violation, std::abs(dr[i - 1]));
        }
    }
    const SignedSums sums = minimality_sums(px, pl, pu, dr, opts.containment_eps);
    cert.lower_sum = sums.lower_sum;
    cert.upper_sum = sums.upper_sum;
    cert.sign_violation = sums.sign_violation;
    for (std::size_t i = 0; i < n; ++i) {
        const int node = static_cast<int>(i);
        cert.containment_violation = std::max({cert.containment_violation, band.lower()[node] - loss_trace[i],
                                               loss_trace[i] - band.upper()[node]});
    }
    return cert;
}

ReflectedCurve reflect_sublinear(const GEngine& engine, const LossFunction& loss, const Band& band,
                                 std::span<const StateField> trajectory, const ReflectOptions& opts) {
    const TimeGrid& grid = engine.time();
    if (static_cast<int>(trajectory.size()) != grid.size()) {
        throw InvalidInput("reflection: need one field per time node");
    }
    RangeReflection r = reflect_range(engine, loss, band, 0, trajectory, opts);
    std::vector<double> reg(r.shift.size());
    for (std::size_t i = 0; i < reg.size(); ++i) reg[i] = r.shift[0] - r.shift[i];
    std::vector<StateField> fields;
    fields.reserve(trajectory.size());
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        const double rho = r.shift[i];
        fields.push_back(trajectory[i].map([rho](double, double v) { return v + rho; }));
    }
    MeanLevelCertificate cert = certify_mean_level(r.loss_trace, r.shift, band, opts);
    return ReflectedCurve{GridCurve(grid, r.shift),
                          BVPath::from_values(grid, reg),
                          std::move(fields),
                          GridCurve(grid, std::move(r.loss_trace)),
                          GridCurve(grid, std::move(r.mean_level)),
                          GridCurve(grid, std::move(r.lower_operator)),
                          GridCurve(grid, std::move(r.upper_operator)),
                          cert};
}

namespace {

// Running suprema from the right: out[i] = max_{j >= i} v[j].
std::vector<double> suffix_max(std::vector<double> v) {
    for (std::size_t i = v.size(); i-- > 1;) v[i - 1] = std::max(v[i - 1], v[i]);
    return v;
}

BoundReport finish(std::vector<double> lhs, std::vector<double> rhs) {
    BoundReport rep{std::numeric_limits<double>::infinity(), 0, std::move(lhs), std::move(rhs)};
    for (std::size_t i = 0; i < rep.lhs.size(); ++i) {
        const double margin = rep.rhs[i] - rep.lhs[i];
        if (margin < rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_node = static_cast<int>(i);
        }
    }
    return rep;
}

}  // namespace

BoundReport apriori_R_bound(const GEngine& engine, const ReflectedCurve& curve, std::span<const StateField> trajectory,
                            const LossFunction& loss, const Band& band) {
    const std::size_t n = trajectory.size();
    if (static_cast<int>(n) != curve.shift.size()) throw InvalidInput("a priori bound: size mismatch");
    const double scale = 1.0 + 2.0 * loss.slope_upper() / loss.slope_lower();
    std::vector<double> abs_mean(n), zero_ops(n), lhs(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int node = static_cast<int>(i);
        const double t = band.grid().node(node);
        abs_mean[i] = engine.gexp(trajectory[i].map([](double, double v) { return std::abs(v); }));
        zero_ops[i] = std::max(std::abs(loss.inverse(t, band.lower()[node])), std::abs(loss.inverse(t, band.upper()[node])));
        lhs[i] = std::abs(curve.shift[node]);
    }
    abs_mean = suffix_max(std::move(abs_mean));
    zero_ops = suffix_max(std::move(zero_ops));
    for (std::size_t i = 0; i < n; ++i) rhs[i] = scale * abs_mean[i] + zero_ops[i];
    return finish(std::move(lhs), std::move(rhs));
}

BoundReport stability_check(const GEngine& engine, const ReflectedCurve& first, const ReflectionInputs& a,
                            const ReflectedCurve& second, const ReflectionInputs& b) {
    if (a.loss.slope_lower() != b.loss.slope_lower() || a.loss.slope_upper() != b.loss.slope_upper() ||
        a.loss.growth() != b.loss.growth()) {
        throw InvalidInput("stability check: loss constants differ between the two problems");
    }
    const std::size_t n = a.trajectory.size();
    if (b.trajectory.size() != n || static_cast<int>(n) != first.shift.size() || static_cast<int>(n) != second.shift.size()) {
        throw InvalidInput("stability check: size mismatch");
    }
    const double c_lo = a.loss.slope_lower();
    const double c_up = a.loss.slope_upper();
    std::vector<double> mean_gap(n), abs_gap(n), cross(n), barrier(n), lhs(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int node = static_cast<int>(i);
        mean_gap[i] = std::abs(first.mean_level[node] - second.mean_level[node]);
        const StateField& x1 = a.trajectory[i];
        const StateField& x2 = b.trajectory[i];
        std::vector<double> diff(x1.values().size());
        for (int j = 0; j < x1.grid().size(); ++j) diff[static_cast<std::size_t>(j)] = std::abs(x1[j] - x2[j]);
        abs_gap[i] = engine.gexp(StateField(x1.grid(), x1.time(), std::move(diff)));

        // First loss inverted on the second field, then both losses evaluated there.
        HbarEvaluator h1(engine, a.loss, x2);
        HbarEvaluator h2(engine, b.loss, x2);
        const double xl = invert_barrier(h1, a.loss, a.band.lower()[node]).root;
        const double xu = invert_barrier(h1, a.loss, a.band.upper()[node]).root;
        cross[i] = std::max(std::abs(h1(xl) - h2(xl)), std::abs(h1(xu) - h2(xu)));
        barrier[i] = std::max(std::abs(a.band.lower()[node] - b.band.lower()[node]),
                              std::abs(a.band.upper()[node] - b.band.upper()[node]));
        lhs[i] = std::abs(first.shift[node] - second.shift[node]);
    }
    mean_gap = suffix_max(std::move(mean_gap));
    abs_gap = suffix_max(std::move(abs_gap));
    cross = suffix_max(std::move(cross));
    barrier = suffix_max(std::move(barrier));
    for (std::size_t i = 0; i < n; ++i) {
        rhs[i] = mean_gap[i] + 2.0 * c_up / c_lo * abs_gap[i] + (cross[i] + barrier[i]) / c_lo;
    }
    return finish(std::move(lhs), std::move(rhs));
}

}  // namespace dmrg
