// SPDX-License-Identifier: Apache-2.0
// Runs every acceptance criterion and prints one line per criterion.
// Exit status is 0 only when all of them pass.

#include "mtcmimo/validation.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv)
{
    mtcmimo::ValidationOptions options;
    if (argc > 1)
        options.seed = std::stoull(argv[1]);

    const auto results = mtcmimo::validate(options, [](const mtcmimo::CheckResult& r) {
        mtcmimo::print_check(r, std::cout);
        std::cout.flush();
    });

    int passed = 0;
    for (const auto& r : results)
        passed += r.passed ? 1 : 0;
    std::cout << passed << "/" << results.size() << " criteria passed\n";
    return mtcmimo::all_passed(results) ? EXIT_SUCCESS : EXIT_FAILURE;
}
