#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dmrg {

/// Input rejected before any computation (bad grid, barrier outside band, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Model configuration that cannot be honoured numerically, e.g. a loss
/// function whose range does not cover the barriers.
class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Effective barriers collapsed (upper operator not above lower operator).
class DegenerateBandError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A PDE march left the configured ceiling.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iteration budget exhausted. Carries the distance history.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), history_(std::move(history)) {}

    const std::vector<double>& history() const noexcept { return history_; }
    double last_residual() const noexcept { return history_.empty() ? 0.0 : history_.back(); }

private:
    std::vector<double> history_;
};

/// Truncation schedule did not stabilise.
class InconclusiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dmrg
