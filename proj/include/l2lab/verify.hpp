// Acceptance checks shared by `l2lab verify` and the acceptance test binary.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "l2lab/simulator.hpp"

namespace l2lab {

struct VerifyOptions {
    /// Reduced horizons, replica counts and grids.
    bool quick = false;
    /// Directory for CSV artifacts; empty disables artifact output.
    std::string out_dir;
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string measured;
    std::string tolerance;
    double seconds = 0.0;
};

/// Runs criteria 1 through 13 in order. Each result line is also streamed to
/// `log` as soon as the criterion finishes.
std::vector<CriterionResult> run_verification(const ScenarioConfig& base, const VerifyOptions& options,
                                              std::ostream& log);

std::string format_result_line(const CriterionResult& r);

/// True iff the two directories hold the same set of *.csv files with identical bytes.
bool csv_dirs_identical(const std::string& a, const std::string& b, std::string* diagnostic = nullptr);

}  // namespace l2lab
