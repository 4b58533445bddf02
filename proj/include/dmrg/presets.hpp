#pragma once

// Named problems used by the CLI, the self-test and the test suites.

#include <string>
#include <vector>

#include "dmrg/dmr_solver.hpp"

namespace dmrg {

struct PresetSize {
    int time_steps = 20;
    int space_points = 101;
};

/// f = 0, payoff |x|, band [1, 2]: the constraint never binds.
DMRProblem interior_preset(PresetSize size = {});
/// f = 0, payoff 0, identity loss, l = 1 - t, u = 2: rho = 1 - t.
DMRProblem lower_ramp_preset(PresetSize size = {});
/// f = -0.2 y + 0.1 z, payoff tanh, l = 0.3 - 0.6 t binds early on.
DMRProblem lipschitz_preset(PresetSize size = {});
/// f = -0.1 y + 0.1 z^2, payoff tanh, sine loss with a binding lower barrier.
DMRProblem quadratic_bounded_preset(PresetSize size = {});
/// f = 0.1 z^2, payoff x: unbounded terminal value.
DMRProblem quadratic_unbounded_preset(PresetSize size = {});
/// f1 = -0.1 y2, f2 = -0.1 y1, payoffs tanh, interior bands.
DMRProblem symmetric_pair_preset(PresetSize size = {});
/// Coupled pair where only the first band binds.
DMRProblem binding_pair_preset(PresetSize size = {});
/// Two components whose generators ignore each other.
DMRProblem decoupled_pair_preset(PresetSize size = {});

const std::vector<std::string>& preset_names();
/// Throws InvalidInput for an unknown name.
DMRProblem make_preset(const std::string& name, PresetSize size = {});

}  // namespace dmrg
