#include "mtcmimo/pilots.hpp"
#include "mtcmimo/validation.hpp"

#include <gtest/gtest.h>

#include <sstream>
#include <vector>

using namespace mtcmimo;

TEST(Validation, WelchPassesOnWbe)
{
    const auto r = check_welch();
    EXPECT_TRUE(r.passed) << r.detail;
    EXPECT_EQ(r.id, 1);
}

TEST(Validation, WelchRejectsRepeatedFrequency)
{
    // A WBE-style book whose index set repeats a frequency is not tight.
    const int n = 10, k = 20;
    Eigen::MatrixXcd s(n, k);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        const int u = i == 1 ? 1 : i + 1;  // u = 1, 1, 3, 4, ...
        for (int c = 0; c < k; ++c)
            s(i, c) = std::polar(1.0 / std::sqrt(double(n)), 2 * pi * u * c / k);
    }
    const auto r = check_welch({s});
    EXPECT_FALSE(r.passed) << r.detail;
    EXPECT_GT(gram_stats(s).welch_sum, 40.0 + 1e-6);
}

TEST(Validation, CheapChecksPass)
{
    for (const auto& r : {check_orthogonality(), check_zf_identity(), check_scheme_reductions()}) {
        EXPECT_TRUE(r.passed) << r.id << " " << r.detail;
        std::ostringstream out;
        print_check(r, out);
        EXPECT_EQ(out.str().rfind("[PASS] ", 0), 0u);
    }
}

TEST(Validation, AllPassedAggregates)
{
    CheckResult a, b;
    a.passed = true;
    b.passed = false;
    EXPECT_TRUE(all_passed({a}));
    EXPECT_FALSE(all_passed({a, b}));
}
