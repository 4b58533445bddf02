#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dmrg/commands.hpp"
#include "dmrg/config.hpp"
#include "dmrg/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Doubly mean-reflected G-BSDE toolkit"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    app.add_option("--config", config_path, "Run configuration file");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed", seed, "Seed overriding the configuration");
    app.add_flag("--verbose", verbose, "Echo the resolved run settings");

    auto* gexp = app.add_subcommand("gexp", "G-expectation of a payoff over the time grid");
    auto* skorokhod = app.add_subcommand("skorokhod", "Forward or backward two-barrier Skorokhod map");
    auto* solve = app.add_subcommand("solve", "Solve a mean-reflected problem");
    auto* selftest = app.add_subcommand("selftest", "Run the property suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dmrg::exit_validation;
    }

    return dmrg::guarded(
        [&] {
            const std::filesystem::path out(out_dir);
            if (selftest->parsed()) {
                const std::uint64_t s = seed.value_or(config_path.empty() ? 0 : dmrg::load_config(config_path).seed);
                if (verbose) std::cout << "selftest: seed " << s << ", artifacts in " << out.string() << '\n';
                return dmrg::cmd_selftest(s, out, std::cout);
            }
            dmrg::RunConfig cfg = config_path.empty() ? dmrg::RunConfig{} : dmrg::load_config(config_path);
            if (seed) cfg.seed = *seed;
            if (config_path.empty() && solve->parsed() && !cfg.preset) {
                throw dmrg::InvalidInput("solve needs --config");
            }
            if (verbose) {
                std::cout << "config: " << (config_path.empty() ? "(defaults)" : config_path) << ", out: " << out.string()
                          << ", seed: " << cfg.seed << ", grid: " << cfg.time_steps << " x " << cfg.space_points << '\n';
            }
            if (gexp->parsed()) return dmrg::cmd_gexp(cfg, out, std::cout);
            if (skorokhod->parsed()) return dmrg::cmd_skorokhod(cfg, out, std::cout);
            return dmrg::cmd_solve(cfg, out, std::cout);
        },
        std::cerr);
}
