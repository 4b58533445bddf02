#include "dmrg/core_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmrg/errors.hpp"

namespace dmrg {

TimeGrid::TimeGrid(double horizon, int n_steps) : horizon_(horizon), n_steps_(n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw InvalidInput("time grid: horizon must be positive and finite");
    }
    if (n_steps < 1) throw InvalidInput("time grid: n_steps must be >= 1");
    dt_ = horizon / n_steps;
    nodes_.resize(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i) nodes_[static_cast<std::size_t>(i)] = horizon * i / n_steps;
    nodes_.back() = horizon;
}

int TimeGrid::index_of(double t) const {
    const double pos = t / dt_;
    const double r = std::round(pos);
    if (r < 0 || r > n_steps_ || std::abs(pos - r) > 1e-9) {
        throw InvalidInput("time " + std::to_string(t) + " is not a grid node");
    }
    return static_cast<int>(r);
}

TimeGrid make_grid(double horizon, int n_steps) { return TimeGrid(horizon, n_steps); }

GridCurve::GridCurve(TimeGrid grid, std::vector<double> values, Regularity regularity)
    : grid_(std::move(grid)), values_(std::move(values)), regularity_(regularity) {
    if (static_cast<int>(values_.size()) != grid_.size()) {
        throw InvalidInput("grid curve: expected " + std::to_string(grid_.size()) + " values, got " +
                           std::to_string(values_.size()));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw InvalidInput("grid curve: non-finite value");
    }
}

double GridCurve::left_limit(int i) const {
    if (regularity_ == Regularity::continuous || i == 0) return (*this)[i];
    return (*this)[i - 1];
}

double GridCurve::min() const { return *std::min_element(values_.begin(), values_.end()); }
double GridCurve::max() const { return *std::max_element(values_.begin(), values_.end()); }

BVPath::BVPath(TimeGrid grid, std::vector<double> increments)
    : grid_(std::move(grid)), increments_(std::move(increments)) {
    if (static_cast<int>(increments_.size()) != grid_.steps()) {
        throw InvalidInput("bv path: expected one increment per step");
    }
    values_.assign(static_cast<std::size_t>(grid_.size()), 0.0);
    variation_.assign(static_cast<std::size_t>(grid_.size()), 0.0);
    for (std::size_t i = 0; i < increments_.size(); ++i) {
        if (!std::isfinite(increments_[i])) throw InvalidInput("bv path: non-finite increment");
        values_[i + 1] = values_[i] + increments_[i];
        variation_[i + 1] = variation_[i] + std::abs(increments_[i]);
    }
}

BVPath BVPath::from_values(const TimeGrid& grid, std::span<const double> values) {
    if (static_cast<int>(values.size()) != grid.size()) {
        throw InvalidInput("bv path: expected one value per node");
    }
    if (values[0] != 0.0) throw InvalidInput("bv path: k_0 must be 0");
    std::vector<double> inc(values.size() - 1);
    for (std::size_t i = 1; i < values.size(); ++i) inc[i - 1] = values[i] - values[i - 1];
    return BVPath(grid, std::move(inc));
}

Band::Band(GridCurve lower, GridCurve upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (!(lower_.grid() == upper_.grid())) throw InvalidInput("band: barriers on different grids");
    gap_ = upper_[0] - lower_[0];
    for (int i = 0; i < lower_.size(); ++i) gap_ = std::min(gap_, upper_[i] - lower_[i]);
    if (!(gap_ > 0.0)) throw InvalidInput("band: upper barrier must stay strictly above lower barrier");
}

double stieltjes_sum(const GridCurve& f, const BVPath& k) {
    if (!(f.grid() == k.grid())) throw InvalidInput("stieltjes sum: grid mismatch");
    double s = 0.0;
    for (int i = 1; i < f.size(); ++i) s += f[i] * k.increment(i);
    return s;
}

std::vector<double> stieltjes_partial_sums(std::span<const double> weights, const BVPath& k) {
    if (static_cast<int>(weights.size()) != k.grid().size()) {
        throw InvalidInput("stieltjes sum: grid mismatch");
    }
    std::vector<double> p(weights.size(), 0.0);
    for (std::size_t i = 1; i < weights.size(); ++i) {
        p[i] = p[i - 1] + weights[i] * k.increment(static_cast<int>(i));
    }
    return p;
}

double max_window_sum(std::span<const double> partial_sums) {
    double best = 0.0;
    double running_min = partial_sums.empty() ? 0.0 : partial_sums[0];
    for (double p : partial_sums) {
        running_min = std::min(running_min, p);
        best = std::max(best, p - running_min);
    }
    return best;
}

double total_variation(const BVPath& k, double t) { return k.variation(k.grid().index_of(t)); }

}  // namespace dmrg
