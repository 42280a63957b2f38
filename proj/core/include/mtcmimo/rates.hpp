// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mtcmimo/pilots.hpp"
#include "mtcmimo/scenario.hpp"
#include "mtcmimo/scheme.hpp"
#include "mtcmimo/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace mtcmimo {

/// Gamma = signal / (noncoherent + coherent + noise). For MRC the signal is
/// M beta p and the noncoherent term includes the device's own beamforming-gain
/// uncertainty; for ZF humans the signal is (M - K_h) gamma beta p.
struct SinrTerms {
    double signal = 0.0;
    double noncoherent = 0.0;
    double coherent = 0.0;
    double noise = 0.0;

    double interference() const { return noncoherent + coherent + noise; }
    double sinr() const;
};

struct SinrBreakdown {
    int device = 0;
    DeviceClass cls = DeviceClass::Human;
    Receiver receiver = Receiver::MRC;
    double gamma = 0.0;  ///< gamma for humans, gamma-bar for machines
    std::vector<SinrTerms> phases;
    std::vector<double> prelogs;
    double rate = 0.0;  ///< bits/s/Hz
};

/// sum_i prelog_i log2(1 + sinr_i). Throws ConfigError on a non-positive prelog.
double rate(std::span<const double> prelogs, std::span<const double> sinrs);

/// gamma-bar_k = L q_k beta_k / (L sum_k' q_k' beta_k' E|phi_k'^H phi_k|^2 + overlap + sigma^2)
/// for every sequence of `book`; own term uses E = 1.
std::vector<double> gamma_bar(const PilotBook& book, std::span<const double> betas,
                              std::span<const double> pilot_powers, double noise, int length,
                              double overlap_power = 0.0);

/// MRC human formula M beta p gamma / (sum_h p_h b_h + extra + sigma^2), with
/// the human interference weights b_h given explicitly. With b_h = beta_h it
/// is the MRC SINR; with M - K_h and b_h = beta_h (1 - gamma_h) it is ZF.
double human_sinr_formula(double antennas, double beta, double power, double gamma,
                          std::span<const double> human_powers, std::span<const double> human_weights,
                          double extra_interference, double noise);

/// Closed-form SINRs of every device under one scheme with fixed pilot
/// powers q (indexed by device). OPA is evaluated per group: the scenario
/// holds the humans and one machine group, the book is the group's
/// orthogonal book of length G, and `scheduled_machines` is the total
/// machine population that shares the CIs (it only affects prelogs).
class RateModel {
public:
    RateModel(const Scenario& scenario, SchemeConfig config, PilotBook machine_book,
              std::vector<double> pilot_powers, int scheduled_machines = -1);

    const Scenario& scenario() const { return scenario_; }
    const SchemeConfig& config() const { return config_; }
    const PilotBook& book() const { return book_; }
    std::span<const double> pilot_powers() const { return q_; }
    int size() const { return scenario_.size(); }

    /// 2 for SC3 humans with separate codebooks, otherwise 1.
    int phases(int k) const;
    std::vector<double> prelogs(int k) const;

    /// gamma_k for humans, gamma-bar_k for machines (depends on p_h in SC3).
    double gamma(int k, std::span<const double> p) const;

    /// SINR terms of all devices in `phase`; devices with one phase return
    /// their only phase for any `phase`.
    std::vector<SinrTerms> terms(int phase, std::span<const double> p) const;
    SinrTerms terms(int k, int phase, std::span<const double> p) const;

    /// Terms whose interference is affine in p, equal to `terms` at p = anchor
    /// and no larger than it for every p >= anchor. Only SC3 with humans
    /// differs from `terms`.
    std::vector<SinrTerms> lower_terms(int phase, std::span<const double> p, std::span<const double> anchor) const;

    /// The first K_h entries of `terms`.
    std::vector<SinrTerms> human_terms(int phase, std::span<const double> p) const;

    double sinr(int k, int phase, std::span<const double> p) const { return terms(k, phase, p).sinr(); }

    SinrBreakdown breakdown(int k, std::span<const double> p) const;
    std::vector<SinrBreakdown> evaluate(std::span<const double> p) const;

    /// M -> infinity limit for a machine; +inf when nothing interferes coherently.
    double asymptotic_sinr(int k, std::span<const double> p) const;

    /// Data powers actually used: `p`, except that SC3 machines reusing
    /// their pilot power transmit q.
    std::vector<double> data_powers(std::span<const double> p) const;

private:
    std::vector<SinrTerms> terms_impl(int phase, std::span<const double> p, std::span<const double> anchor,
                                      bool humans_only = false) const;
    std::vector<double> human_gammas() const;
    std::vector<double> machine_gamma_bars(std::span<const double> p) const;

    Scenario scenario_;
    SchemeConfig config_;
    PilotBook book_;
    std::vector<double> q_;
    std::vector<double> betas_;
    Eigen::MatrixXd expected_;  // K_m x K_m, zero diagonal
    std::vector<double> human_gamma_;
    std::vector<double> machine_load_;  // L sum_k' q beta E, own term included
    int scheduled_machines_ = 0;
};

/// Closed-form machine limit for M -> infinity; independent of the scheme's
/// noncoherent terms, so SC1 and SC2 coincide.
double asymptotic_sinr_machine(const RateModel& model, int k, std::span<const double> p);

struct McOptions {
    long long trials = 10000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    bool perfect_csi = false;  ///< use h itself as the estimate
};

struct McSinr {
    int device = 0;
    int phase = 0;
    double sinr = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo use-and-forget SINR of every device and phase: simulates the
/// scheme's training (with SC3 human data overlapping machine training),
/// LMMSE estimation with the realized pilots, MRC (and ZF for humans when
/// configured) and data reception. Data symbols and receiver noise are
/// averaged analytically per trial; fading, training noise, SC3 overlap
/// symbols and random pilot assignments are sampled.
std::vector<McSinr> mc_use_and_forget(const RateModel& model, std::span<const double> p, const McOptions& options);

/// Single-device convenience wrapper (phase 0 unless given).
McSinr mc_use_and_forget_sinr(const RateModel& model, int device, std::span<const double> p,
                              const McOptions& options, int phase = 0);

/// Machine ids (relative to the machine block) of OPA group g.
std::vector<int> opa_group_members(int machines, int group_size, int group);

/// Humans plus the machines of OPA group g, with ids renumbered.
Scenario opa_group_scenario(const Scenario& scenario, int group_size, int group);

void write_rates_csv(const RateModel& model, std::span<const SinrBreakdown> rows, std::uint64_t seed,
                     std::ostream& out, bool header = true);

} // namespace mtcmimo
