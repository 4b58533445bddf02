#pragma once

// One-dimensional sublinear expectation: the G function, the explicit
// finite-difference G-heat march, a classical single-volatility backend and a
// finite-scenario lower bound.

#include <span>
#include <vector>

#include "dmrg/core_grid.hpp"

namespace dmrg {

struct VolatilityBand {
    VolatilityBand(double lower, double upper);

    double sigma_lower;
    double sigma_upper;

    bool degenerate() const noexcept { return sigma_lower == sigma_upper; }
    bool contains(double sigma) const noexcept { return sigma >= sigma_lower && sigma <= sigma_upper; }
};

/// G(a) = (sigma_upper^2 a^+ - sigma_lower^2 a^-) / 2
double g_function(double a, const VolatilityBand& band);

/// Symmetric uniform grid [-half_width, half_width] with an odd number of
/// points, so x = 0 is the centre node.
class SpatialGrid {
public:
    SpatialGrid(double half_width, int m_points);

    double x_min() const noexcept { return -half_width_; }
    double x_max() const noexcept { return half_width_; }
    int size() const noexcept { return m_points_; }
    int center() const noexcept { return m_points_ / 2; }
    double dx() const noexcept { return dx_; }
    double x(int j) const noexcept { return -half_width_ + dx_ * j; }

    friend bool operator==(const SpatialGrid& a, const SpatialGrid& b) noexcept {
        return a.half_width_ == b.half_width_ && a.m_points_ == b.m_points_;
    }

private:
    double half_width_;
    int m_points_;
    double dx_;
};

/// Default truncation [-8 sigma_upper sqrt(T), 8 sigma_upper sqrt(T)].
SpatialGrid default_spatial_grid(const VolatilityBand& band, double horizon, int m_points);

/// Function of the state B_t at a fixed time t, stored at spatial nodes.
class StateField {
public:
    StateField(SpatialGrid grid, double t, std::vector<double> values);

    template <class Fn>
    static StateField sample(const SpatialGrid& grid, double t, Fn&& fn) {
        std::vector<double> v(static_cast<std::size_t>(grid.size()));
        for (int j = 0; j < grid.size(); ++j) v[static_cast<std::size_t>(j)] = fn(grid.x(j));
        return StateField(grid, t, std::move(v));
    }
    static StateField constant(const SpatialGrid& grid, double t, double c) {
        return StateField(grid, t, std::vector<double>(static_cast<std::size_t>(grid.size()), c));
    }

    const SpatialGrid& grid() const noexcept { return grid_; }
    double time() const noexcept { return t_; }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& mutable_values() noexcept { return values_; }
    double operator[](int j) const { return values_[static_cast<std::size_t>(j)]; }
    double at_origin() const { return (*this)[grid_.center()]; }

    /// Piecewise-linear interpolant, extended linearly beyond the domain.
    double interpolate(double x) const;

    /// Nodewise composition v -> fn(x_j, v_j).
    template <class Fn>
    StateField map(Fn&& fn) const {
        std::vector<double> v(values_.size());
        for (int j = 0; j < grid_.size(); ++j)
            v[static_cast<std::size_t>(j)] = fn(grid_.x(j), values_[static_cast<std::size_t>(j)]);
        return StateField(grid_, t_, std::move(v));
    }

    bool is_constant() const noexcept;

private:
    SpatialGrid grid_;
    double t_;
    std::vector<double> values_;
};

/// Central second difference with D2 = 0 at both boundary nodes.
void second_difference(std::span<const double> u, double dx, std::span<double> out);

/// Central first difference, one-sided at the boundary nodes.
void first_difference(std::span<const double> u, double dx, std::span<double> out);

class GEngine {
public:
    GEngine(VolatilityBand band, SpatialGrid space, TimeGrid time, double c_cfl = 0.45);

    const VolatilityBand& band() const noexcept { return band_; }
    const SpatialGrid& space() const noexcept { return space_; }
    const TimeGrid& time() const noexcept { return time_; }
    double cfl() const noexcept { return c_cfl_; }

    /// Sub-steps per time-grid step so that dtau <= c_cfl dx^2 / sigma_upper^2.
    int substeps() const noexcept { return substeps_; }
    double dtau() const noexcept { return time_.dt() / substeps_; }

    /// E_s[phi(B_t)] as a function of B_s.
    StateField solve_gheat(const StateField& terminal, double back_to) const;

    /// E[phi(B_t)] = u(0, 0).
    double gexp(const StateField& payoff) const;

    /// Same engine on another volatility band (shares the grids).
    GEngine with_band(const VolatilityBand& band) const { return GEngine(band, space_, time_, c_cfl_); }

private:
    VolatilityBand band_;
    SpatialGrid space_;
    TimeGrid time_;
    double c_cfl_;
    int substeps_;
};

enum class QuadratureRule { exact_linear, gauss_hermite };

/// E[phi(sigma W_t)] for the linear interpolant of the field.
double classical_expectation(const StateField& payoff, double sigma,
                             QuadratureRule rule = QuadratureRule::exact_linear);

/// Largest classical expectation over a finite set of volatilities in the band.
double scenario_lower_bound(const StateField& payoff, std::span<const double> sigmas,
                            const VolatilityBand& band);

/// Nodes and weights of the n-point Gauss-Hermite rule for weight exp(-x^2).
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const HermiteRule& gauss_hermite(int n);

}  // namespace dmrg
