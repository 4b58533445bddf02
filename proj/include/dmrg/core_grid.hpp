#pragma once

// Time discretisation, grid-sampled curves, bounded-variation paths and the
// discrete Stieltjes sums every other module builds on.

#include <span>
#include <vector>

namespace dmrg {

/// Uniform partition 0 = t_0 < t_1 < ... < t_N = T.
class TimeGrid {
public:
    TimeGrid(double horizon, int n_steps);

    double horizon() const noexcept { return horizon_; }
    int steps() const noexcept { return n_steps_; }
    int size() const noexcept { return n_steps_ + 1; }
    double dt() const noexcept { return dt_; }
    double node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
    std::span<const double> nodes() const noexcept { return nodes_; }

    /// Index of a grid node; throws InvalidInput for off-grid times.
    int index_of(double t) const;

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
        return a.horizon_ == b.horizon_ && a.n_steps_ == b.n_steps_;
    }

private:
    double horizon_;
    int n_steps_;
    double dt_;
    std::vector<double> nodes_;
};

TimeGrid make_grid(double horizon, int n_steps);

enum class Regularity { continuous, cadlag };

/// Deterministic function sampled at every node of a TimeGrid.
class GridCurve {
public:
    GridCurve(TimeGrid grid, std::vector<double> values,
              Regularity regularity = Regularity::continuous);

    /// Samples `fn(t)` at every node.
    template <class Fn>
    static GridCurve sample(const TimeGrid& grid, Fn&& fn,
                            Regularity regularity = Regularity::continuous) {
        std::vector<double> v;
        v.reserve(static_cast<std::size_t>(grid.size()));
        for (double t : grid.nodes()) v.push_back(fn(t));
        return GridCurve(grid, std::move(v), regularity);
    }

    static GridCurve constant(const TimeGrid& grid, double c) {
        return GridCurve(grid, std::vector<double>(static_cast<std::size_t>(grid.size()), c));
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    Regularity regularity() const noexcept { return regularity_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
    int size() const noexcept { return static_cast<int>(values_.size()); }

    /// Left limit at node i. For cadlag curves the path is read as a step
    /// function constant on [t_{i-1}, t_i), so the left limit is the previous
    /// node value; continuous curves return the node value.
    double left_limit(int i) const;

    double min() const;
    double max() const;

private:
    TimeGrid grid_;
    std::vector<double> values_;
    Regularity regularity_;
};

/// Path of bounded variation with k_0 = 0. Increment i (1-based) lives on
/// (t_{i-1}, t_i].
class BVPath {
public:
    /// `increments` has one entry per step (size N).
    BVPath(TimeGrid grid, std::vector<double> increments);

    /// Builds the path from node values; values[0] must be exactly 0.
    static BVPath from_values(const TimeGrid& grid, std::span<const double> values);

    static BVPath zero(const TimeGrid& grid) {
        return BVPath(grid, std::vector<double>(static_cast<std::size_t>(grid.steps()), 0.0));
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::span<const double> increments() const noexcept { return increments_; }
    /// Increment on (t_{i-1}, t_i], i in [1, N].
    double increment(int i) const { return increments_[static_cast<std::size_t>(i - 1)]; }

    /// k at node i.
    double value(int i) const { return values_[static_cast<std::size_t>(i)]; }
    std::span<const double> values() const noexcept { return values_; }

    /// |k| at node i.
    double variation(int i) const { return variation_[static_cast<std::size_t>(i)]; }
    double total_variation() const noexcept { return variation_.back(); }

private:
    TimeGrid grid_;
    std::vector<double> increments_;
    std::vector<double> values_;
    std::vector<double> variation_;
};

/// Pair of barriers with strictly positive gap at every node.
class Band {
public:
    Band(GridCurve lower, GridCurve upper);

    const GridCurve& lower() const noexcept { return lower_; }
    const GridCurve& upper() const noexcept { return upper_; }
    const TimeGrid& grid() const noexcept { return lower_.grid(); }
    double gap() const noexcept { return gap_; }

private:
    GridCurve lower_;
    GridCurve upper_;
    double gap_;
};

/// sum_i f(t_i) * dk_i, increments paired with the right endpoint.
double stieltjes_sum(const GridCurve& f, const BVPath& k);

/// Running sums P_j = sum_{i <= j} w_i * dk_i for arbitrary weights w
/// (size N + 1, w[0] unused). P_0 = 0.
std::vector<double> stieltjes_partial_sums(std::span<const double> weights, const BVPath& k);

/// max over node pairs s <= t of P_t - P_s; 0 for the empty window.
double max_window_sum(std::span<const double> partial_sums);

/// |k|_t for a grid time t.
double total_variation(const BVPath& k, double t);

}  // namespace dmrg
