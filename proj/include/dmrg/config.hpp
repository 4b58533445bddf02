#pragma once

// Line-oriented run configuration:
//
//   # comment
//   key = value
//   [component 1]
//   key = value
//
// Keys outside a section are global; component keys live in sections.
// Unknown keys are rejected with their line number.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmrg/dmr_solver.hpp"
#include "dmrg/expression.hpp"

namespace dmrg {

struct ComponentConfig {
    std::string payoff = "0";
    std::string generator = "0";
    GeneratorKind kind = GeneratorKind::lipschitz;
    double lipschitz = 0.0;
    double lambda = 0.0;
    double gamma = 0.0;
    std::string loss = "identity";  ///< identity | affine | sine
    double loss_scale = 1.0;
    double loss_offset = 0.0;
    double loss_amplitude = 0.5;
    std::string lower = "-1";
    std::string upper = "1";
    std::optional<std::filesystem::path> barriers_csv;  ///< columns t, l, u
};

struct RunConfig {
    std::optional<std::string> preset;
    double sigma_lower = 1.0;
    double sigma_upper = 2.0;
    double horizon = 1.0;
    int time_steps = 20;
    int space_points = 101;
    std::optional<double> half_width;
    Regime regime = Regime::lipschitz;
    int max_iters = 50;
    double tol = 1e-8;
    std::optional<double> window;
    double initial = 0.0;
    Construction construction = Construction::upper;
    std::vector<double> truncation{2.0, 4.0, 8.0};
    std::uint64_t seed = 0;
    int k_paths = 0;  ///< Monte-Carlo paths for the K diagnostic; 0 skips it

    std::string payoff = "x^2";  ///< gexp command

    std::string path_preset = "custom";  ///< skorokhod command: ramp | interior | random | custom
    std::string direction = "forward";
    std::string input = "t";
    std::string lower = "0";
    std::string upper = "1";
    double anchor = 0.0;

    std::vector<ComponentConfig> components;
};

/// `base` resolves relative CSV paths.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

TimeGrid config_grid(const RunConfig& cfg);
GEngine config_engine(const RunConfig& cfg);
PicardOptions config_picard(const RunConfig& cfg);
/// Problem described by the preset or the component sections.
DMRProblem build_problem(const RunConfig& cfg);

/// Tabulated barriers (columns t, l, u) matched to the grid nodes.
Band load_barrier_csv(const std::filesystem::path& path, const TimeGrid& grid);

}  // namespace dmrg
