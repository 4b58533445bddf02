#pragma once

// Property suite behind the `selftest` subcommand.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dmrg {

struct CheckResult {
    int criterion;  ///< acceptance criterion number; 0 for extra invariants
    std::string name;
    bool passed;
    std::string detail;  ///< margins; deterministic for a given seed
    double seconds;      ///< wall time, kept out of written reports
};

struct SelftestReport {
    std::vector<CheckResult> checks;
    bool passed() const;
    /// All checks of one criterion passed (false when there are none).
    bool criterion_passed(int criterion) const;
    double seconds() const;
};

/// Runs every check; `artifacts` receives sample CLI outputs.
/// `progress` (optional) gets one line per check as it finishes.
SelftestReport run_selftest(std::uint64_t seed, const std::filesystem::path& artifacts, std::ostream* progress = nullptr);

/// One line per check, without timings.
void write_report(const SelftestReport& report, std::ostream& os);

}  // namespace dmrg
