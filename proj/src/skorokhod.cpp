#include "dmrg/skorokhod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dmrg/errors.hpp"

namespace dmrg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_grid(const GridCurve& xbar, const Band& band) {
    if (!(xbar.grid() == band.grid())) throw InvalidInput("skorokhod: input and band on different grids");
}

double positive_part(double v) { return v > 0.0 ? v : 0.0; }

SkorokhodSolution assemble_forward(const GridCurve& xbar, std::vector<double> k) {
    std::vector<double> x(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) x[i] = xbar[static_cast<int>(i)] + k[i];
    k[0] = 0.0;
    return SkorokhodSolution{xbar, GridCurve(xbar.grid(), std::move(x), xbar.regularity()),
                             BVPath::from_values(xbar.grid(), k), Direction::forward, 0.0};
}

// shift[i] = k_T - k_{t_i}
SkorokhodSolution assemble_backward(const GridCurve& xbar, double anchor,
                                    const std::vector<double>& shift) {
    const int n = xbar.size() - 1;
    std::vector<double> x(shift.size()), k(shift.size());
    for (int i = 0; i <= n; ++i) {
        x[static_cast<std::size_t>(i)] = anchor + xbar[n] - xbar[i] + shift[static_cast<std::size_t>(i)];
        k[static_cast<std::size_t>(i)] = shift[0] - shift[static_cast<std::size_t>(i)];
    }
    k[0] = 0.0;
    return SkorokhodSolution{xbar, GridCurve(xbar.grid(), std::move(x), xbar.regularity()),
                             BVPath::from_values(xbar.grid(), k), Direction::backward, anchor};
}

void check_forward_start(const GridCurve& xbar, const Band& band) {
    require_same_grid(xbar, band);
    if (xbar[0] < band.lower()[0] || xbar[0] > band.upper()[0]) {
        throw InvalidInput("forward skorokhod: initial value outside [l_0, u_0]");
    }
}

void check_backward_anchor(const GridCurve& xbar, double anchor, const Band& band) {
    require_same_grid(xbar, band);
    const int n = xbar.size() - 1;
    if (!std::isfinite(anchor) || anchor < band.lower()[n] || anchor > band.upper()[n]) {
        throw InvalidInput("backward skorokhod: terminal anchor outside [l_T, u_T]");
    }
}

// Terms of the backward formula over the sample window [first, last] of node
// indices, shared by the direct and recursive evaluations.
struct BackwardTerms {
    std::vector<double> c;  // a~ + xbar_{T-} - xbar_v - l_v
    std::vector<double> d;  // a~ + xbar_{T-} - xbar_s - u_s
    double head = 0.0;      // (a~ - u_T)^+
    double correction = 0.0;  // a~ - (a + jump of xbar at T)
    int last = 0;           // last sampled node
};

BackwardTerms backward_terms(const GridCurve& xbar, double anchor, const Band& band) {
    const int n = xbar.size() - 1;
    const GridCurve& l = band.lower();
    const GridCurve& u = band.upper();
    BackwardTerms bt;
    bt.c.resize(static_cast<std::size_t>(n) + 1);
    bt.d.resize(static_cast<std::size_t>(n) + 1);
    if (xbar.regularity() == Regularity::continuous) {
        for (int j = 0; j <= n; ++j) {
            bt.c[static_cast<std::size_t>(j)] = anchor + xbar[n] - xbar[j] - l[j];
            bt.d[static_cast<std::size_t>(j)] = anchor + xbar[n] - xbar[j] - u[j];
        }
        bt.head = positive_part(anchor - u[n]);
        bt.last = n;
        return bt;
    }
    // Step data: on (t_j, t_{j+1}] the left limits equal the node-j values.
    const double jump = xbar[n] - xbar.left_limit(n);
    const double a_tilde = std::max(std::min(anchor + jump, u.left_limit(n)), l.left_limit(n));
    const double xbar_minus = xbar.left_limit(n);
    for (int j = 0; j < n; ++j) {
        bt.c[static_cast<std::size_t>(j)] = a_tilde + xbar_minus - xbar[j] - l[j];
        bt.d[static_cast<std::size_t>(j)] = a_tilde + xbar_minus - xbar[j] - u[j];
    }
    bt.head = positive_part(a_tilde - u.left_limit(n));
    bt.correction = a_tilde - (anchor + jump);
    bt.last = n - 1;
    return bt;
}

}  // namespace

SkorokhodSolution forward_skorokhod(const GridCurve& xbar, const Band& band) {
    check_forward_start(xbar, band);
    const int n = xbar.size() - 1;
    const GridCurve& l = band.lower();
    const GridCurve& u = band.upper();
    std::vector<double> k(static_cast<std::size_t>(n) + 1);
    const double head = positive_part(xbar[0] - u[0]);
    double running_inf = kInf;  // inf_{v <= t}(xbar_v - l_v)
    double s = -kInf;           // sup_s [(xbar_s - u_s) ^ inf_{s<=v<=t}(xbar_v - l_v)]
    for (int t = 0; t <= n; ++t) {
        const double b = xbar[t] - l[t];
        const double a = xbar[t] - u[t];
        running_inf = std::min(running_inf, b);
        s = std::min(std::max(s, a), b);
        k[static_cast<std::size_t>(t)] = -std::max(std::min(head, running_inf), s);
    }
    return assemble_forward(xbar, std::move(k));
}

SkorokhodSolution forward_skorokhod_direct(const GridCurve& xbar, const Band& band) {
    check_forward_start(xbar, band);
    const int n = xbar.size() - 1;
    const GridCurve& l = band.lower();
    const GridCurve& u = band.upper();
    std::vector<double> k(static_cast<std::size_t>(n) + 1);
    const double head = positive_part(xbar[0] - u[0]);
    for (int t = 0; t <= n; ++t) {
        double inf_all = kInf;
        for (int v = 0; v <= t; ++v) inf_all = std::min(inf_all, xbar[v] - l[v]);
        double sup = -kInf;
        for (int s = 0; s <= t; ++s) {
            double inner = kInf;
            for (int v = s; v <= t; ++v) inner = std::min(inner, xbar[v] - l[v]);
            sup = std::max(sup, std::min(xbar[s] - u[s], inner));
        }
        k[static_cast<std::size_t>(t)] = -std::max(std::min(head, inf_all), sup);
    }
    return assemble_forward(xbar, std::move(k));
}

SkorokhodSolution backward_skorokhod(const GridCurve& xbar, double anchor, const Band& band) {
    check_backward_anchor(xbar, anchor, band);
    const int n = xbar.size() - 1;
    const BackwardTerms bt = backward_terms(xbar, anchor, band);
    std::vector<double> shift(static_cast<std::size_t>(n) + 1, 0.0);
    double running_inf = kInf;
    double s = -kInf;
    for (int t = bt.last; t >= 0; --t) {
        const double c = bt.c[static_cast<std::size_t>(t)];
        const double d = bt.d[static_cast<std::size_t>(t)];
        running_inf = std::min(running_inf, c);
        s = std::min(c, std::max(d, s));
        shift[static_cast<std::size_t>(t)] = -std::max(std::min(bt.head, running_inf), s) + bt.correction;
    }
    shift[static_cast<std::size_t>(n)] = 0.0;
    return assemble_backward(xbar, anchor, shift);
}

SkorokhodSolution backward_skorokhod_direct(const GridCurve& xbar, double anchor, const Band& band) {
    check_backward_anchor(xbar, anchor, band);
    const int n = xbar.size() - 1;
    const BackwardTerms bt = backward_terms(xbar, anchor, band);
    std::vector<double> shift(static_cast<std::size_t>(n) + 1, 0.0);
    for (int t = 0; t <= bt.last; ++t) {
        double inf_all = kInf;
        for (int v = t; v <= bt.last; ++v) inf_all = std::min(inf_all, bt.c[static_cast<std::size_t>(v)]);
        double sup = -kInf;
        for (int s = t; s <= bt.last; ++s) {
            double inner = kInf;
            for (int v = t; v <= s; ++v) inner = std::min(inner, bt.c[static_cast<std::size_t>(v)]);
            sup = std::max(sup, std::min(bt.d[static_cast<std::size_t>(s)], inner));
        }
        shift[static_cast<std::size_t>(t)] = -std::max(std::min(bt.head, inf_all), sup) + bt.correction;
    }
    shift[static_cast<std::size_t>(n)] = 0.0;
    return assemble_backward(xbar, anchor, shift);
}

std::vector<double> backward_shift(std::span<const double> xbar, double anchor,
                                   std::span<const double> lower, std::span<const double> upper) {
    const std::size_t size = xbar.size();
    if (size == 0 || lower.size() != size || upper.size() != size) {
        throw InvalidInput("backward skorokhod: array sizes differ");
    }
    const std::size_t n = size - 1;
    if (anchor < lower[n] || anchor > upper[n]) {
        throw InvalidInput("backward skorokhod: terminal anchor outside [l_T, u_T]");
    }
    std::vector<double> shift(size, 0.0);
    const double head = positive_part(anchor - upper[n]);
    double running_inf = kInf;
    double s = -kInf;
    for (std::size_t t = size; t-- > 0;) {
        const double c = anchor + xbar[n] - xbar[t] - lower[t];
        const double d = anchor + xbar[n] - xbar[t] - upper[t];
        running_inf = std::min(running_inf, c);
        s = std::min(c, std::max(d, s));
        shift[t] = -std::max(std::min(head, running_inf), s);
    }
    shift[n] = 0.0;
    return shift;
}

SignedSums minimality_sums(std::span<const double> paired_x, std::span<const double> paired_l,
                           std::span<const double> paired_u, std::span<const double> dk,
                           double tol) {
    // Index 0 of the paired arrays is unused; increment i sits at dk[i - 1].
    const std::size_t size = paired_x.size();
    std::vector<double> pl(size, 0.0), pu(size, 0.0);
    double sign = 0.0;
    for (std::size_t i = 1; i < size; ++i) {
        const double inc = dk[i - 1];
        pl[i] = pl[i - 1] + (paired_x[i] - paired_l[i]) * inc;
        pu[i] = pu[i - 1] + (paired_x[i] - paired_u[i]) * inc;
        if (paired_x[i] < paired_u[i] - tol && inc < 0.0) sign = std::max(sign, -inc);
        if (paired_x[i] > paired_l[i] + tol && inc > 0.0) sign = std::max(sign, inc);
    }
    return SignedSums{max_window_sum(pl), max_window_sum(pu), sign};
}

MinimalityReport check_minimality(const SkorokhodSolution& sol, const Band& band, double tol) {
    const int n = sol.x.size() - 1;
    const GridCurve& l = band.lower();
    const GridCurve& u = band.upper();
    MinimalityReport rep;
    rep.tol = tol;

    std::vector<double> px(static_cast<std::size_t>(n) + 1), pl(px.size()), pu(px.size());
    for (int i = 1; i <= n; ++i) {
        const int p = sol.direction == Direction::forward ? i : i - 1;
        px[static_cast<std::size_t>(i)] = sol.x[p];
        pl[static_cast<std::size_t>(i)] = l[p];
        pu[static_cast<std::size_t>(i)] = u[p];
    }
    const SignedSums sums = minimality_sums(px, pl, pu, sol.k.increments(), tol);
    rep.lower_sum = sums.lower_sum;
    rep.upper_sum = sums.upper_sum;
    rep.sign_violation = sums.sign_violation;

    double mag = 0.0;
    for (int i = 0; i <= n; ++i) {
        double expected = sol.direction == Direction::forward
                              ? sol.input[i] + sol.k.value(i)
                              : sol.anchor + sol.input[n] - sol.input[i] + sol.k.value(n) - sol.k.value(i);
        rep.decomposition_residual = std::max(rep.decomposition_residual, std::abs(sol.x[i] - expected));
        rep.containment_violation = std::max(
            {rep.containment_violation, l[i] - sol.x[i], sol.x[i] - u[i]});
        mag = std::max(mag, std::abs(sol.input[i]));
    }
    rep.magnitude = mag + sol.k.total_variation();
    return rep;
}

namespace {

// k_t = max_{s <= t} (target_s - path_s)^+ for the lower one-sided problem.
void running_regulator(std::span<const double> excess, std::vector<double>& out) {
    double m = 0.0;
    for (std::size_t i = 0; i < excess.size(); ++i) {
        m = std::max(m, excess[i]);
        out[i] = m;
    }
}

std::vector<double> alternating_fixpoint(std::span<const double> xbar, std::span<const double> l,
                                         std::span<const double> u, int max_iters, double tol,
                                         int& sweeps) {
    const std::size_t size = xbar.size();
    std::vector<double> up(size, 0.0), down(size, 0.0), next(size), excess(size);
    std::vector<double> history;
    for (sweeps = 1; sweeps <= max_iters; ++sweeps) {
        double change = 0.0;
        for (std::size_t i = 0; i < size; ++i) excess[i] = l[i] - (xbar[i] - down[i]);
        running_regulator(excess, next);
        for (std::size_t i = 0; i < size; ++i) {
            change = std::max(change, std::abs(next[i] - up[i]));
            up[i] = next[i];
        }
        for (std::size_t i = 0; i < size; ++i) excess[i] = (xbar[i] + up[i]) - u[i];
        running_regulator(excess, next);
        for (std::size_t i = 0; i < size; ++i) {
            change = std::max(change, std::abs(next[i] - down[i]));
            down[i] = next[i];
        }
        history.push_back(change);
        if (change < tol) {
            std::vector<double> k(size);
            for (std::size_t i = 0; i < size; ++i) k[i] = up[i] - down[i];
            return k;
        }
    }
    throw ConvergenceError("skorokhod oracle: no fixpoint after " + std::to_string(max_iters) +
                               " sweeps",
                           std::move(history));
}

}  // namespace

OracleResult oracle_skorokhod(const GridCurve& xbar, const Band& band, int max_iters, double tol) {
    check_forward_start(xbar, band);
    OracleResult res{SkorokhodSolution{xbar, xbar, BVPath::zero(xbar.grid())}, 0};
    std::vector<double> k = alternating_fixpoint(xbar.values(), band.lower().values(),
                                                 band.upper().values(), max_iters, tol, res.sweeps);
    res.solution = assemble_forward(xbar, std::move(k));
    return res;
}

OracleResult oracle_backward_skorokhod(const GridCurve& xbar, double anchor, const Band& band,
                                       int max_iters, double tol) {
    check_backward_anchor(xbar, anchor, band);
    const int n = xbar.size() - 1;
    std::vector<double> ry(static_cast<std::size_t>(n) + 1), rl(ry.size()), ru(ry.size());
    for (int r = 0; r <= n; ++r) {
        const int i = n - r;
        ry[static_cast<std::size_t>(r)] = anchor + xbar[n] - xbar[i];
        rl[static_cast<std::size_t>(r)] = band.lower()[i];
        ru[static_cast<std::size_t>(r)] = band.upper()[i];
    }
    OracleResult res{SkorokhodSolution{xbar, xbar, BVPath::zero(xbar.grid())}, 0};
    std::vector<double> kappa = alternating_fixpoint(ry, rl, ru, max_iters, tol, res.sweeps);
    std::vector<double> shift(ry.size());
    for (int i = 0; i <= n; ++i) shift[static_cast<std::size_t>(i)] = kappa[static_cast<std::size_t>(n - i)];
    res.solution = assemble_backward(xbar, anchor, shift);
    return res;
}

}  // namespace dmrg
