// Full-scale acceptance run: one PASS/FAIL line per criterion, exit 0 iff all pass.
#include <cstdlib>
#include <iostream>

#include "l2lab/verify.hpp"

int main(int argc, char** argv) {
    l2lab::VerifyOptions options;
    if (argc > 1) options.out_dir = argv[1];
    const auto results = l2lab::run_verification(l2lab::ScenarioConfig{}, options, std::cout);
    int failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " criteria passed\n";
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
