// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mtcmimo {

/// One acceptance entry. `measured` and `threshold` are the headline numbers
/// (worst case over the sub-cases); `detail` lists the rest.
struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
    double seconds = 0.0;
};

struct ValidationOptions {
    std::uint64_t seed = 1;
    long long nmse_trials = 10000;
    long long mc_trials = 10000;
    long long rpa_draws = 100000;
    int frontier_points = 11;
    unsigned workers = 1;
};

/// Welch equality on the given books (N_p x K matrices). Passes when
/// welch_sum = K^2/N_p and every row sum of phi_bar is K/N_p within 1e-9
/// relative, and rho(phi_bar) = K/N_p within 1e-8.
CheckResult check_welch(const std::vector<Eigen::MatrixXcd>& books);
/// WBE books for (5,45), (10,20), (10,45), (20,45).
CheckResult check_welch();

CheckResult check_orthogonality();
CheckResult check_error_floors(const ValidationOptions& options = {});
CheckResult check_power_identity(const ValidationOptions& options = {});
CheckResult check_mc_agreement(const ValidationOptions& options = {});
CheckResult check_asymptotics(const ValidationOptions& options = {});
CheckResult check_zf_identity(const ValidationOptions& options = {});
CheckResult check_scheme_reductions(const ValidationOptions& options = {});
CheckResult check_rpa_expectation(const ValidationOptions& options = {});
CheckResult check_frontier_orderings(const ValidationOptions& options = {});
CheckResult check_solver_contracts(const ValidationOptions& options = {});

/// Every check in id order. `progress`, when set, sees each result as soon
/// as it is available.
std::vector<CheckResult> validate(const ValidationOptions& options = {},
                                  const std::function<void(const CheckResult&)>& progress = {});

/// "[PASS] 1 name: measured ... threshold ... (t s)" plus an indented detail line.
void print_check(const CheckResult& result, std::ostream& out);

bool all_passed(const std::vector<CheckResult>& results);

} // namespace mtcmimo
