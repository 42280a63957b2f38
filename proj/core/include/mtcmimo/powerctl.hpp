// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mtcmimo/pilots.hpp"
#include "mtcmimo/rates.hpp"
#include "mtcmimo/scenario.hpp"
#include "mtcmimo/scheme.hpp"
#include "mtcmimo/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace mtcmimo {

/// Pilot powers: q_max beta_min / beta_k for machines, q_max for humans.
std::vector<double> sci_pilot_powers(const Scenario& scenario);

struct PowerProfile {
    std::vector<double> q;
    std::vector<double> p;
    double q_max = 1.0;
    double p_max = 1.0;

    /// Componentwise 0 <= q <= q_max and 0 <= p <= p_max (relative slack `tol`).
    bool within_caps(double tol = 1e-12) const;
};

struct FeasibilityOptions {
    double tolerance = 1e-10;  ///< relative step declaring convergence
    int max_iterations = 10000;
    /// SC3 humans: meet `sc3_human_rate` exactly through both phases instead
    /// of requiring the single-log-equivalent SINR in each phase.
    std::optional<double> sc3_human_rate;
};

struct FeasibilityResult {
    bool feasible = false;
    std::vector<double> p;
    int iterations = 0;
    bool monotone = true;  ///< every iterate was componentwise >= its predecessor
    bool hit_cap = false;  ///< some p_k exceeds p_max (reached or certified)
};

/// Interference-function fixed point p_k <- t_k I_k(p) / c_k from p = 0 for
/// per-device SINR targets. SC3 humans must meet t_k in both phases (or the
/// exact rate when configured). Infeasible as soon as any p_k > p_max, or
/// when the iteration cap is reached.
FeasibilityResult maxmin_feasible(const RateModel& model, std::span<const double> targets, double p_max,
                                  const FeasibilityOptions& options = {});

/// Largest relative shortfall max_k (t_k - Gamma_k) / t_k over devices and
/// phases (SC3 exact mode checks rates instead); <= 0 means all targets met.
double target_violation(const RateModel& model, std::span<const double> targets, std::span<const double> p,
                        const FeasibilityOptions& options = {});

/// SINR needed to reach `rate` with the given pre-logs (single-log equivalent).
double sinr_for_rate(double rate, std::span<const double> prelogs);

struct BisectionOptions {
    double relative_tolerance = 1e-7;
    int max_iterations = 200;
    /// Stop at the first target the solver can neither certify nor refute
    /// within its iteration cap (treated as infeasible). Off: keep bisecting.
    bool stop_at_undecided = true;
};

struct MachineTargetResult {
    bool feasible = false;  ///< humans' targets reachable with t_m = 0
    double t_m = 0.0;       ///< largest feasible common machine SINR
    double t_upper = 0.0;   ///< smallest tested infeasible value (or t_hi)
    std::vector<double> p;
    long long iterations = 0;
    int bisection_steps = 0;
};

/// Upper bound on the common machine SINR: min_k c_k p_max / I_k(p_max e_k).
double machine_sinr_upper_bound(const RateModel& model, double p_max);

/// Bisects the common machine SINR for fixed human SINR targets `t_h` on
/// [0, min(upper bound, known_infeasible)]. Stops early at a target the
/// solver can neither certify nor refute unless told otherwise.
MachineTargetResult max_machine_target(const RateModel& model, double t_h, double p_max,
                                       const FeasibilityOptions& feasibility = {},
                                       const BisectionOptions& bisection = {},
                                       double known_infeasible = std::numeric_limits<double>::infinity());

struct RegionOptions {
    SchemeConfig config;  ///< scheme, receiver, N, N_p^h, alpha (ignored), G
    PilotKind book = PilotKind::Wbe;
    std::uint64_t book_seed = 1;
    /// Machine pilot lengths to search; empty selects
    /// {1, ..., min(K_m, N - N_p^h - 1)} (SC1: N - 1).
    std::vector<int> machine_pilot_lengths;
    std::vector<double> alpha_grid;  ///< SC1; empty selects 0, 0.02, ..., 1
    bool sc3_exact_inversion = false;
    FeasibilityOptions feasibility;
    BisectionOptions bisection;
    unsigned workers = 1;
};

struct RatePoint {
    Scheme scheme = Scheme::SC2;
    Receiver receiver = Receiver::MRC;
    double r_h_target = 0.0;
    double r_m = 0.0;
    bool feasible = false;
    int n_p_m = 0;
    double alpha = 0.0;
    double t_m = 0.0;
    std::vector<double> p;
    long long solver_iterations = 0;
};

/// Max-min machine rate subject to every human reaching `r_h_target`,
/// searched over machine pilot lengths (SC1 additionally over alpha). Pilot
/// powers q are fixed and indexed by device of `scenario`.
RatePoint maxmin_machine_rate(double r_h_target, const Scenario& scenario, std::span<const double> q,
                              const RegionOptions& options);

std::vector<RatePoint> trace_rate_region(const Scenario& scenario, std::span<const double> q,
                                         std::span<const double> r_h_grid, const RegionOptions& options);

/// OPA: machines in ceil(K_m / G) groups with orthogonal pilots of length G,
/// one group per CI; humans must reach the target in every CI.
RatePoint opa_machine_rate(double r_h_target, const Scenario& scenario, std::span<const double> q,
                           const RegionOptions& options);

std::vector<RatePoint> trace_opa_region(const Scenario& scenario, std::span<const double> q,
                                        std::span<const double> r_h_grid, const RegionOptions& options);

/// Largest common human rate with machines silent in data (t_m = 0),
/// maximised over the machine pilot grid; SC1 uses alpha = 1.
double max_human_rate(const Scenario& scenario, std::span<const double> q, const RegionOptions& options);

void write_region_csv(std::span<const RatePoint> points, const Scenario& scenario, const RegionOptions& options,
                      std::uint64_t seed, std::ostream& out, bool header = true);

} // namespace mtcmimo
