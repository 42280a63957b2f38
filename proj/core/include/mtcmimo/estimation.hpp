// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mtcmimo/pilots.hpp"
#include "mtcmimo/random.hpp"
#include "mtcmimo/scheme.hpp"
#include "mtcmimo/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace mtcmimo {

/// M x K small-scale fading, i.i.d. CN(0, 1) entries; column k is h_k.
using FadingRealization = Eigen::MatrixXcd;

FadingRealization draw_fading(int antennas, int devices, GaussianSource& source);

/// One uplink training window: `trainers[c]` sends sqrt(L q) phi_c where
/// phi_c is column c of `pilots`; `overlapping` devices send unit-power
/// Gaussian data symbols scaled by sqrt(p) during the same samples.
struct TrainingWindow {
    Eigen::MatrixXcd pilots;  ///< L x T
    std::vector<int> trainers;
    std::vector<int> overlapping;

    int length() const { return static_cast<int>(pilots.rows()); }
};

/// Training windows of a scheme for K_h humans and the given machine book
/// (whose length must be N_p^m). Human pilots are canonical basis vectors.
std::vector<TrainingWindow> training_windows(const SchemeConfig& config, int humans, const PilotBook& machine_book);

struct TrainingObservation {
    Eigen::MatrixXcd received;  ///< M x L
    TrainingWindow window;
};

/// Y = sqrt(L) sum_t sqrt(q_t beta_t) h_t phi_t^H + sum_o sqrt(p_o beta_o) h_o s_o^H + Z,
/// with Z i.i.d. CN(0, noise). `betas`, `pilot_powers` and `data_powers` are
/// indexed by device; `fading` holds every device's column.
TrainingObservation synthesize_training(const TrainingWindow& window, const FadingRealization& fading,
                                        std::span<const double> betas, std::span<const double> pilot_powers,
                                        std::span<const double> data_powers, double noise,
                                        GaussianSource& source);

/// y_k = Y phi_k.
Eigen::VectorXcd despread(const Eigen::MatrixXcd& received, const Eigen::VectorXcd& phi);

/// Per-component variance of y_k for trainer column c:
/// L sum_t q_t beta_t |phi_t^H phi_c|^2 + sum_o p_o beta_o + noise
/// (own term included, realized pilots).
double despread_variance(const TrainingWindow& window, int column, std::span<const double> betas,
                         std::span<const double> pilot_powers, std::span<const double> data_powers,
                         double noise);

struct ChannelEstimate {
    Eigen::VectorXcd h_hat;
    Estimator estimator = Estimator::LMMSE;
    double gamma = 0.0;     ///< E|[h_hat]_m|^2
    double error_ms = 0.0;  ///< analytic E|[h_hat - h]_m|^2
};

/// h_hat = y / sqrt(L beta q); error = (variance - L beta q) / (L beta q).
/// Throws std::domain_error unless beta q > 0.
ChannelEstimate estimate_ls(const Eigen::VectorXcd& y, double beta, double pilot_power, int length,
                            double despread_var);

/// h_hat = sqrt(L beta q) / variance * y; gamma = L beta q / variance and
/// error = 1 - gamma.
ChannelEstimate estimate_lmmse(const Eigen::VectorXcd& y, double beta, double pilot_power, int length,
                               double despread_var);

/// Analytic per-device errors for a stand-alone machine window of length L,
/// using expected cross-correlations of `book`. `overlap_power` is the
/// received data power sum_h p_h beta_h leaking into the window (SC3).
std::vector<double> analytic_ls_errors(const PilotBook& book, std::span<const double> betas,
                                       std::span<const double> pilot_powers, double noise, int length,
                                       double overlap_power = 0.0);
std::vector<double> analytic_gammas(const PilotBook& book, std::span<const double> betas,
                                    std::span<const double> pilot_powers, double noise, int length,
                                    double overlap_power = 0.0);

struct NmseConfig {
    int machines = 20;
    int pilot_length = 10;
    int antennas = 50;
    PilotKind kind = PilotKind::Wbe;
    Estimator estimator = Estimator::LMMSE;
    std::vector<double> snr_db{-10, -5, 0, 5, 10, 15, 20, 25, 30, 35, 40};
    int trials = 10000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct NmsePoint {
    double snr_db = 0.0;
    double nmse = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo E||h - h_hat||^2 / M averaged over devices, with beta = 1,
/// noise = 1 and a common pilot power q = 10^(snr/10) (SNR := q beta / sigma^2
/// per pilot symbol). Random assignments are redrawn every trial.
std::vector<NmsePoint> nmse_curve(const NmseConfig& config);

void write_nmse_csv(const NmseConfig& config, std::span<const NmsePoint> points, std::ostream& out,
                    bool header = true);

} // namespace mtcmimo
