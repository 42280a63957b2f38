// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mtcmimo/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace mtcmimo {

/// A set of unit-norm pilot sequences phi_k of length N_p. Device k transmits
/// sqrt(N_p) * phi_k. Sequences are stored as the columns of an N_p x K matrix.
class PilotBook {
public:
    PilotKind kind() const { return kind_; }
    int length() const { return static_cast<int>(sequences_.rows()); }
    int size() const { return static_cast<int>(sequences_.cols()); }

    const Eigen::MatrixXcd& sequences() const { return sequences_; }
    Eigen::VectorXcd sequence(int k) const { return sequences_.col(k); }

    /// WBE frequency indices u (empty for other kinds).
    const std::vector<int>& wbe_indices() const { return wbe_u_; }

    /// Seed of a random assignment, and the orthonormal pilot each device drew.
    std::uint64_t seed() const { return seed_; }
    const std::vector<int>& assignment() const { return assignment_; }

    /// |phi_i^H phi_j|^2 of the realized sequences.
    double cross_correlation(int i, int j) const;

    /// Re-draws a random assignment with the same length and size.
    PilotBook redraw(std::uint64_t seed) const;

    friend PilotBook make_orthogonal_book(int length, int count);
    friend PilotBook make_wbe_book(int length, int count, std::span<const int> u);
    friend PilotBook make_random_assignment_book(int length, int count, std::uint64_t seed);

private:
    PilotKind kind_ = PilotKind::Orthogonal;
    Eigen::MatrixXcd sequences_;
    std::vector<int> wbe_u_;
    std::vector<int> assignment_;
    std::uint64_t seed_ = 0;
};

/// Canonical basis vectors e_1..e_K (K may be 0). Throws ConfigError if K > N_p.
PilotBook make_orthogonal_book(int length, int count);

/// N_p rows u_1..u_{N_p} of the K_m-point DFT, normalised:
/// phi_k[i] = exp(j 2 pi u_i (k-1) / K_m) / sqrt(N_p).
/// Empty `u` selects u_i = i. Entries must be distinct modulo K_m.
PilotBook make_wbe_book(int length, int count, std::span<const int> u = {});

/// Each device independently picks one of N_p canonical pilots.
PilotBook make_random_assignment_book(int length, int count, std::uint64_t seed);

/// Builds a book of the requested kind (the seed only matters for RPA).
PilotBook make_book(PilotKind kind, int length, int count, std::uint64_t seed = 0);

/// E|phi_i^H phi_j|^2: realized value for deterministic books, 1/N_p for a
/// random assignment. Throws std::domain_error when i == j.
double expected_cross_correlation(const PilotBook& book, int i, int j);

/// K x K matrix of expected cross-correlations with a zero diagonal.
Eigen::MatrixXd expected_cross_correlations(const PilotBook& book);

struct GramStats {
    Eigen::MatrixXd phi;      ///< |phi_i^H phi_j|^2, zero diagonal
    Eigen::MatrixXd phi_bar;  ///< phi + I
    double spectral_radius = 0.0;
    Eigen::VectorXd row_sums;  ///< of phi_bar
    double welch_sum = 0.0;    ///< sum over all i, j including the diagonal
    int length = 0;
};

GramStats gram_stats(const PilotBook& book);
/// Same for sequences given as the columns of an N_p x K matrix.
GramStats gram_stats(const Eigen::MatrixXcd& sequences);

/// Strict spectral-radius condition for a common per-device error `e`:
/// LS needs rho < 1 + e (e > 0), LMMSE needs rho < 1 / (1 - e) (0 < e < 1).
/// Bounds within 1e-12 relative of rho are reported infeasible.
bool error_feasible(const GramStats& stats, double e, Estimator estimator);

/// Minimum pilot powers giving every device the error `e`:
/// mu = (I - phi_bar/(1+e))^-1 eta/(1+e) for LS and
/// mu = (I - (1-e) phi_bar)^-1 (1-e) eta for LMMSE, eta = sigma^2/N_p,
/// then q_k = mu_k / beta_k. Throws InfeasibleError if `e` is not feasible.
std::vector<double> min_power_vector(const GramStats& stats, std::span<const double> betas, double e,
                                     double noise, int pilot_length, Estimator estimator);

/// Closed-form minimum powers valid for any WBE book:
/// LS: sigma^2 / ((N_p (1+e) - K_m) beta_k),
/// LMMSE: sigma^2 (1-e) / ((N_p - K_m (1-e)) beta_k).
std::vector<double> closed_form_power(std::span<const double> betas, double e, double noise, int pilot_length,
                                      int machines, Estimator estimator);

/// Lowest achievable min-max error with WBE pilots: (K_m - N_p)/K_m for
/// LMMSE, (K_m - N_p)/N_p for LS.
double error_floor(int machines, int pilot_length, Estimator estimator);

/// Welch lower bound on the summed squared cross-correlations,
/// max(K, K^2/N_p).
double welch_lower_bound(int pilot_length, int count);

/// CSV export: a '#' header line with kind and parameters, then one row per
/// sequence holding re,im pairs (2 N_p columns).
void write_book_csv(const PilotBook& book, std::ostream& out);

} // namespace mtcmimo
