#pragma once

// CLI subcommands. Each writes its files under `out` and returns an exit code.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "dmrg/config.hpp"

namespace dmrg {

enum ExitCode : int {
    exit_ok = 0,
    exit_failed = 1,
    exit_validation = 2,
    exit_divergence = 3,
    exit_nonconvergence = 4,
    exit_inconclusive = 5,
};

/// "%.12g"
std::string format_number(double v);

/// gexp.csv: t, gexp, classical_lower, classical_upper, scenario_lower_bound
int cmd_gexp(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
/// skorokhod.csv: t, xbar, l, u, x, k, tv_k, then a "# key,value" certification block
int cmd_skorokhod(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
/// trace_j.csv, picard.csv and cert.txt; exit_failed when a certificate fails
int cmd_solve(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
/// selftest.txt plus sample artifacts; exit_failed when any check fails
int cmd_selftest(std::uint64_t seed, const std::filesystem::path& out, std::ostream& log);

/// Runs `body` and maps library exceptions to exit codes, reporting on `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace dmrg
