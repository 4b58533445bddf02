#include "dmrg/gexpectation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "dmrg/errors.hpp"

namespace dmrg {

VolatilityBand::VolatilityBand(double lower, double upper) : sigma_lower(lower), sigma_upper(upper) {
    if (!(lower > 0.0) || !(upper >= lower) || !std::isfinite(upper)) {
        throw InvalidInput("volatility band: need 0 < sigma_lower <= sigma_upper < inf");
    }
}

double g_function(double a, const VolatilityBand& band) {
    return a >= 0.0 ? 0.5 * band.sigma_upper * band.sigma_upper * a
                    : 0.5 * band.sigma_lower * band.sigma_lower * a;
}

SpatialGrid::SpatialGrid(double half_width, int m_points) : half_width_(half_width), m_points_(m_points) {
    if (!(half_width > 0.0) || !std::isfinite(half_width)) {
        throw InvalidInput("spatial grid: half width must be positive");
    }
    if (m_points < 3 || m_points % 2 == 0) {
        throw InvalidInput("spatial grid: m_points must be odd and >= 3");
    }
    dx_ = 2.0 * half_width / (m_points - 1);
}

SpatialGrid default_spatial_grid(const VolatilityBand& band, double horizon, int m_points) {
    return SpatialGrid(8.0 * band.sigma_upper * std::sqrt(horizon), m_points);
}

StateField::StateField(SpatialGrid grid, double t, std::vector<double> values)
    : grid_(grid), t_(t), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != grid_.size()) {
        throw InvalidInput("state field: expected " + std::to_string(grid_.size()) + " values");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw InvalidInput("state field: non-finite value");
    }
}

double StateField::interpolate(double x) const {
    const int m = grid_.size();
    double pos = (x - grid_.x_min()) / grid_.dx();
    int j = static_cast<int>(std::floor(pos));
    j = std::clamp(j, 0, m - 2);
    const double w = pos - j;
    return (1.0 - w) * (*this)[j] + w * (*this)[j + 1];
}

bool StateField::is_constant() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_[0]; });
}

void second_difference(std::span<const double> u, double dx, std::span<double> out) {
    const std::size_t m = u.size();
    const double inv = 1.0 / (dx * dx);
    out[0] = 0.0;
    out[m - 1] = 0.0;
    for (std::size_t j = 1; j + 1 < m; ++j) out[j] = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv;
}

void first_difference(std::span<const double> u, double dx, std::span<double> out) {
    const std::size_t m = u.size();
    out[0] = (u[1] - u[0]) / dx;
    out[m - 1] = (u[m - 1] - u[m - 2]) / dx;
    for (std::size_t j = 1; j + 1 < m; ++j) out[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
}

GEngine::GEngine(VolatilityBand band, SpatialGrid space, TimeGrid time, double c_cfl)
    : band_(band), space_(space), time_(std::move(time)), c_cfl_(c_cfl) {
    if (!(c_cfl > 0.0 && c_cfl <= 1.0)) throw InvalidInput("g engine: c_cfl must lie in (0, 1]");
    const double max_dtau = c_cfl * space_.dx() * space_.dx() / (band_.sigma_upper * band_.sigma_upper);
    substeps_ = std::max(1, static_cast<int>(std::ceil(time_.dt() / max_dtau - 1e-12)));
}

StateField GEngine::solve_gheat(const StateField& terminal, double back_to) const {
    if (!(terminal.grid() == space_)) throw InvalidInput("solve_gheat: field on a different spatial grid");
    const int from = time_.index_of(terminal.time());
    const int to = time_.index_of(back_to);
    if (to > from) throw InvalidInput("solve_gheat: target time after the payoff time");
    if (terminal.is_constant()) return StateField(space_, time_.node(to), {terminal.values().begin(), terminal.values().end()});

    std::vector<double> u(terminal.values().begin(), terminal.values().end());
    std::vector<double> d2(u.size());
    const double tau = dtau();
    const double up = 0.5 * band_.sigma_upper * band_.sigma_upper * tau;
    const double lo = 0.5 * band_.sigma_lower * band_.sigma_lower * tau;
    const int total = (from - to) * substeps_;
    for (int step = 0; step < total; ++step) {
        second_difference(u, space_.dx(), d2);
        for (std::size_t j = 0; j < u.size(); ++j) u[j] += d2[j] >= 0.0 ? up * d2[j] : lo * d2[j];
    }
    return StateField(space_, time_.node(to), std::move(u));
}

double GEngine::gexp(const StateField& payoff) const { return solve_gheat(payoff, 0.0).at_origin(); }

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Integral of (a + b x) against the N(0, s^2) density over [alpha, beta].
double linear_piece(double a, double b, double alpha, double beta, double s) {
    const double za = alpha / s, zb = beta / s;
    const double pa = std::isinf(za) ? 0.0 : normal_pdf(za);
    const double pb = std::isinf(zb) ? 0.0 : normal_pdf(zb);
    return a * (normal_cdf(zb) - normal_cdf(za)) + b * s * (pa - pb);
}

double exact_linear(const StateField& f, double s) {
    const SpatialGrid& g = f.grid();
    const int m = g.size();
    double total = 0.0;
    auto piece = [&](int j, double alpha, double beta) {
        const double b = (f[j + 1] - f[j]) / g.dx();
        const double a = f[j] - b * g.x(j);
        total += linear_piece(a, b, alpha, beta, s);
    };
    const double inf = std::numeric_limits<double>::infinity();
    piece(0, -inf, g.x(1));
    for (int j = 1; j < m - 2; ++j) piece(j, g.x(j), g.x(j + 1));
    piece(m - 2, g.x(m - 2), inf);
    return total;
}

}  // namespace

const HermiteRule& gauss_hermite(int n) {
    static std::mutex mu;
    static std::map<int, HermiteRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    if (n < 1) throw InvalidInput("gauss_hermite: n must be positive");

    // Newton iteration on the orthonormal Hermite recurrence.
    HermiteRule rule;
    rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
    rule.weights.assign(static_cast<std::size_t>(n), 0.0);
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    const int half = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0) z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2) z = 1.86 * z - 0.86 * rule.nodes[0];
        else if (i == 3) z = 1.91 * z - 0.91 * rule.nodes[1];
        else z = 2.0 * z - rule.nodes[static_cast<std::size_t>(i - 2)];
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15) break;
        }
        rule.nodes[static_cast<std::size_t>(i)] = z;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = -z;
        rule.weights[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = 2.0 / (pp * pp);
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

double classical_expectation(const StateField& payoff, double sigma, QuadratureRule rule) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("classical expectation: sigma must be positive");
    if (payoff.time() < 0.0) throw InvalidInput("classical expectation: negative time");
    if (payoff.is_constant()) return payoff[0];
    const double s = sigma * std::sqrt(payoff.time());
    if (s == 0.0) return payoff.interpolate(0.0);
    if (rule == QuadratureRule::exact_linear) return exact_linear(payoff, s);

    const HermiteRule& gh = gauss_hermite(64);
    double total = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        total += gh.weights[i] * payoff.interpolate(std::numbers::sqrt2 * s * gh.nodes[i]);
    }
    return total / std::sqrt(std::numbers::pi);
}

double scenario_lower_bound(const StateField& payoff, std::span<const double> sigmas,
                            const VolatilityBand& band) {
    if (sigmas.empty()) throw InvalidInput("scenario bound: no volatilities given");
    double best = -std::numeric_limits<double>::infinity();
    for (double s : sigmas) {
        if (!band.contains(s)) throw InvalidInput("scenario bound: sigma " + std::to_string(s) + " outside band");
        best = std::max(best, classical_expectation(payoff, s));
    }
    return best;
}

}  // namespace dmrg
