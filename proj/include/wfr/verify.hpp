#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wfr::verify {

struct Options {
    /// Fewer random samples and coarser grids where the check allows it.
    bool fast = false;
    std::uint64_t seed = 20240607;
};

struct CaseResult {
    std::string suite;
    std::string name;
    bool passed = false;
    /// Measured quantities and thresholds; deterministic for a fixed seed.
    std::string detail;
};

/// Names accepted by run_suite, in execution order.
const std::vector<std::string>& suite_names();

std::vector<CaseResult> run_suite(const std::string& suite, const Options& opts);

/// Expands "all" and "none" and runs the requested suites in order.
std::vector<CaseResult> run(const std::vector<std::string>& suites, const Options& opts);

/// JUnit-style XML with one <testsuite> per suite. No timings or host data,
/// so identical results give identical bytes.
std::string junit_xml(const std::vector<CaseResult>& results, const Options& opts);

bool all_passed(const std::vector<CaseResult>& results);

}  // namespace wfr::verify
