// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/estimation.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mtcmimo {

namespace {

std::vector<int> iota_ids(int first, int count)
{
    std::vector<int> ids(static_cast<std::size_t>(count));
    std::iota(ids.begin(), ids.end(), first);
    return ids;
}

double at(std::span<const double> v, int k)
{
    return v[static_cast<std::size_t>(k)];
}

} // namespace

FadingRealization draw_fading(int antennas, int devices, GaussianSource& source)
{
    if (antennas < 1 || devices < 0)
        throw ConfigError("fading needs M >= 1 and K >= 0");
    return source.complex_matrix(antennas, devices);
}

std::vector<TrainingWindow> training_windows(const SchemeConfig& config, int humans, const PilotBook& machine_book)
{
    const int machines = machine_book.size();
    const int lh = config.human_pilot_length;
    int lm = config.scheme == Scheme::OPA ? config.opa_group_size : config.machine_pilot_length;
    if (machines > 0 && machine_book.length() != lm)
        throw ConfigError("machine pilot book length " + std::to_string(machine_book.length())
                          + " does not match the scheme's machine window " + std::to_string(lm));
    if (humans > lh)
        throw ConfigError("human pilot length must be >= K_h");

    std::vector<TrainingWindow> windows;
    TrainingWindow human_window;
    if (humans > 0) {
        human_window.pilots = Eigen::MatrixXcd::Identity(lh, humans);
        human_window.trainers = iota_ids(0, humans);
    }
    TrainingWindow machine_window;
    if (machines > 0) {
        machine_window.pilots = machine_book.sequences();
        machine_window.trainers = iota_ids(humans, machines);
    }

    switch (config.scheme) {
    case Scheme::SC1:
        if (humans > 0)
            windows.push_back(std::move(human_window));
        if (machines > 0)
            windows.push_back(std::move(machine_window));
        break;
    case Scheme::SC3:
        if (humans > 0)
            windows.push_back(human_window);
        if (machines > 0) {
            machine_window.overlapping = iota_ids(0, humans);
            windows.push_back(std::move(machine_window));
        }
        break;
    case Scheme::SC2:
    case Scheme::OPA: {
        TrainingWindow joint;
        joint.pilots = Eigen::MatrixXcd::Zero(lh + lm, humans + machines);
        if (humans > 0)
            joint.pilots.topLeftCorner(lh, humans) = human_window.pilots;
        if (machines > 0)
            joint.pilots.bottomRightCorner(lm, machines) = machine_book.sequences();
        joint.trainers = iota_ids(0, humans + machines);
        windows.push_back(std::move(joint));
        break;
    }
    }
    return windows;
}

TrainingObservation synthesize_training(const TrainingWindow& window, const FadingRealization& fading,
                                        std::span<const double> betas, std::span<const double> pilot_powers,
                                        std::span<const double> data_powers, double noise,
                                        GaussianSource& source)
{
    const auto devices = static_cast<std::size_t>(fading.cols());
    if (betas.size() != devices || pilot_powers.size() != devices)
        throw ConfigError("betas and pilot powers must have one entry per fading column");
    if (!window.overlapping.empty() && data_powers.size() != devices)
        throw ConfigError("overlapping data needs one data power per device");
    if (static_cast<int>(window.trainers.size()) != window.pilots.cols())
        throw ConfigError("one pilot column per trainer required");

    const int length = window.length();
    TrainingObservation obs;
    obs.window = window;
    // Noise first so that the trainer and overlap terms do not shift its draws.
    obs.received = source.complex_matrix(fading.rows(), length, noise);
    for (std::size_t c = 0; c < window.trainers.size(); ++c) {
        const int k = window.trainers[c];
        const double amp = std::sqrt(length * at(pilot_powers, k) * at(betas, k));
        obs.received.noalias() += amp * fading.col(k) * window.pilots.col(static_cast<Eigen::Index>(c)).adjoint();
    }
    for (int k : window.overlapping) {
        const Eigen::VectorXcd symbols = source.complex_matrix(length, 1);
        const double amp = std::sqrt(at(data_powers, k) * at(betas, k));
        obs.received.noalias() += amp * fading.col(k) * symbols.adjoint();
    }
    return obs;
}

Eigen::VectorXcd despread(const Eigen::MatrixXcd& received, const Eigen::VectorXcd& phi)
{
    if (received.cols() != phi.size())
        throw ConfigError("pilot length does not match the received window");
    return received * phi;
}

double despread_variance(const TrainingWindow& window, int column, std::span<const double> betas,
                         std::span<const double> pilot_powers, std::span<const double> data_powers, double noise)
{
    const Eigen::VectorXcd phi = window.pilots.col(column);
    double v = noise;
    for (std::size_t c = 0; c < window.trainers.size(); ++c) {
        const int k = window.trainers[c];
        const double overlap = std::norm(window.pilots.col(static_cast<Eigen::Index>(c)).dot(phi));
        v += window.length() * at(pilot_powers, k) * at(betas, k) * overlap;
    }
    for (int k : window.overlapping)
        v += at(data_powers, k) * at(betas, k) * phi.squaredNorm();
    return v;
}

ChannelEstimate estimate_ls(const Eigen::VectorXcd& y, double beta, double pilot_power, int length,
                            double despread_var)
{
    const double own = length * beta * pilot_power;
    if (!(own > 0.0))
        throw std::domain_error("LS estimate needs positive beta * q");
    ChannelEstimate est;
    est.estimator = Estimator::LS;
    est.h_hat = y / std::sqrt(own);
    est.gamma = despread_var / own;
    est.error_ms = (despread_var - own) / own;
    return est;
}

ChannelEstimate estimate_lmmse(const Eigen::VectorXcd& y, double beta, double pilot_power, int length,
                               double despread_var)
{
    if (!(despread_var > 0.0))
        throw std::domain_error("LMMSE estimate needs a positive observation variance");
    const double own = length * beta * pilot_power;
    ChannelEstimate est;
    est.estimator = Estimator::LMMSE;
    est.h_hat = (std::sqrt(own) / despread_var) * y;
    est.gamma = own / despread_var;
    est.error_ms = 1.0 - est.gamma;
    return est;
}

namespace {

std::vector<double> expected_variances(const PilotBook& book, std::span<const double> betas,
                                       std::span<const double> pilot_powers, double noise, int length,
                                       double overlap_power)
{
    const int k = book.size();
    if (static_cast<int>(betas.size()) != k || static_cast<int>(pilot_powers.size()) != k)
        throw ConfigError("one beta and one pilot power per sequence required");
    const Eigen::MatrixXd e = expected_cross_correlations(book);
    std::vector<double> v(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        double s = at(betas, i) * at(pilot_powers, i);
        for (int j = 0; j < k; ++j)
            if (j != i)
                s += at(betas, j) * at(pilot_powers, j) * e(j, i);
        v[static_cast<std::size_t>(i)] = length * s + overlap_power + noise;
    }
    return v;
}

} // namespace

std::vector<double> analytic_ls_errors(const PilotBook& book, std::span<const double> betas,
                                       std::span<const double> pilot_powers, double noise, int length,
                                       double overlap_power)
{
    auto v = expected_variances(book, betas, pilot_powers, noise, length, overlap_power);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double own = length * betas[i] * pilot_powers[i];
        if (!(own > 0.0))
            throw std::domain_error("LS error needs positive beta * q");
        v[i] = (v[i] - own) / own;
    }
    return v;
}

std::vector<double> analytic_gammas(const PilotBook& book, std::span<const double> betas,
                                    std::span<const double> pilot_powers, double noise, int length,
                                    double overlap_power)
{
    auto v = expected_variances(book, betas, pilot_powers, noise, length, overlap_power);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = length * betas[i] * pilot_powers[i] / v[i];
    return v;
}

std::vector<NmsePoint> nmse_curve(const NmseConfig& config)
{
    if (config.trials < 1)
        throw ConfigError("nmse_curve needs at least one trial");
    if (config.machines < 1 || config.pilot_length < 1 || config.antennas < 1)
        throw ConfigError("nmse_curve needs K_m, N_p, M >= 1");

    const int k = config.machines;
    const int length = config.pilot_length;
    const PilotBook base = make_book(config.kind, length, k, config.seed);
    const std::vector<double> betas(static_cast<std::size_t>(k), 1.0);
    const double noise = 1.0;

    std::vector<NmsePoint> out;
    for (std::size_t s = 0; s < config.snr_db.size(); ++s) {
        const double snr = config.snr_db[s];
        const double q = std::pow(10.0, snr / 10.0);
        const std::vector<double> powers(static_cast<std::size_t>(k), q);

        auto batches = run_batches(config.trials, 1, config.workers, [&](long long trial, Eigen::Ref<Eigen::VectorXd> sample) {
            GaussianSource source(derive_seed(config.seed, 0x6e6d7365ULL + s, static_cast<std::uint64_t>(trial)));
            const PilotBook book = base.kind() == PilotKind::RandomAssignment
                                       ? base.redraw(derive_seed(config.seed, 0x72656472ULL, static_cast<std::uint64_t>(trial)))
                                       : base;
            TrainingWindow window;
            window.pilots = book.sequences();
            window.trainers = iota_ids(0, k);
            const FadingRealization h = draw_fading(config.antennas, k, source);
            const auto obs = synthesize_training(window, h, betas, powers, {}, noise, source);
            double err = 0.0;
            for (int d = 0; d < k; ++d) {
                const Eigen::VectorXcd y = despread(obs.received, window.pilots.col(d));
                const double var = despread_variance(window, d, betas, powers, {}, noise);
                const auto est = config.estimator == Estimator::LS ? estimate_ls(y, 1.0, q, length, var)
                                                                    : estimate_lmmse(y, 1.0, q, length, var);
                err += (est.h_hat - h.col(d)).squaredNorm();
            }
            sample(0) = err / (static_cast<double>(k) * config.antennas);
        });
        out.push_back({snr, batches.mean()(0), batches.std_error(0)});
    }
    return out;
}

void write_nmse_csv(const NmseConfig& config, std::span<const NmsePoint> points, std::ostream& out, bool header)
{
    if (header)
        out << "snr_db,nmse,estimator,book_kind,K_m,N_p,M,trials,seed,nmse_std_error\n";
    const auto old_precision = out.precision(12);
    for (const auto& p : points)
        out << p.snr_db << ',' << p.nmse << ',' << to_string(config.estimator) << ',' << to_string(config.kind)
            << ',' << config.machines << ',' << config.pilot_length << ',' << config.antennas << ','
            << config.trials << ',' << config.seed << ',' << p.std_error << '\n';
    out.precision(old_precision);
}

} // namespace mtcmimo
