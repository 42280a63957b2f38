// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mtcmimo/types.hpp"

#include <vector>

namespace mtcmimo {

/// Coherence-interval layout shared by estimation, rates and power control.
///
/// Pilot windows per scheme:
///  - SC1: humans train over N_p^h samples in their CIs, machines over N_p^m
///    in theirs.
///  - SC2 and OPA: a single window of N_p^h + N_p^m samples. Human pilots span
///    the first K_h coordinates, machine pilots live in the last N_p^m.
///  - SC3: humans train over N_p^h samples, then machines over N_p^m samples
///    while humans already transmit data.
struct SchemeConfig {
    Scheme scheme = Scheme::SC2;
    int coherence_length = 100;
    int human_pilot_length = 5;
    int machine_pilot_length = 10;
    double alpha = 0.5;  ///< SC1 only: fraction of CIs given to humans
    Receiver receiver = Receiver::MRC;
    int opa_group_size = 9;
    /// SC3 only: machines reuse their pilot power for data, so humans see the
    /// same interference in both phases and use a single codebook.
    bool sc3_identical_machine_powers = false;

    /// Throws ConfigError on inconsistent lengths for K_h humans and K_m machines.
    void validate(int humans, int machines) const;

    /// Samples of the window in which humans (machines) send pilots; this is
    /// the N_p entering gamma and gamma-bar.
    int human_training_length() const;
    int machine_training_length() const;

    /// Samples spent on pilots by everybody in one CI.
    int total_pilot_samples() const;

    /// Pre-log factors; SC3 humans get two (machine-training phase, data
    /// phase) unless machines reuse pilot powers. OPA machine prelogs include
    /// the 1/groups scheduling factor for `machines` devices.
    std::vector<double> human_prelogs() const;
    std::vector<double> machine_prelogs(int machines) const;

    /// Number of OPA groups, ceil(K_m / G).
    int opa_group_count(int machines) const;
};

} // namespace mtcmimo
