// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/pilots.hpp"
#include "mtcmimo/random.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <string>

namespace mtcmimo {

double PilotBook::cross_correlation(int i, int j) const
{
    return std::norm(sequences_.col(i).dot(sequences_.col(j)));
}

PilotBook PilotBook::redraw(std::uint64_t seed) const
{
    if (kind_ != PilotKind::RandomAssignment)
        return *this;
    return make_random_assignment_book(length(), size(), seed);
}

PilotBook make_orthogonal_book(int length, int count)
{
    if (length < 1 || count < 0)
        throw ConfigError("orthogonal book needs length >= 1 and count >= 0");
    if (count > length)
        throw ConfigError("cannot fit " + std::to_string(count) + " orthogonal pilots in length "
                          + std::to_string(length));
    PilotBook book;
    book.kind_ = PilotKind::Orthogonal;
    book.sequences_ = Eigen::MatrixXcd::Identity(length, count);
    return book;
}

PilotBook make_wbe_book(int length, int count, std::span<const int> u)
{
    if (length < 1 || count < 1)
        throw ConfigError("pilot book needs length >= 1 and count >= 1");
    if (length > count)
        throw ConfigError("WBE construction needs N_p <= K_m");

    std::vector<int> indices(u.begin(), u.end());
    if (indices.empty()) {
        indices.resize(static_cast<std::size_t>(length));
        for (int i = 0; i < length; ++i)
            indices[static_cast<std::size_t>(i)] = i + 1;
    }
    if (static_cast<int>(indices.size()) != length)
        throw ConfigError("WBE index vector must have N_p entries");
    std::set<int> residues;
    for (int v : indices) {
        if (v < 0)
            throw ConfigError("WBE indices must be non-negative");
        if (!residues.insert(v % count).second)
            throw ConfigError("WBE indices must be distinct modulo K_m");
    }

    PilotBook book;
    book.kind_ = PilotKind::Wbe;
    book.wbe_u_ = indices;
    book.sequences_.resize(length, count);
    const double scale = 1.0 / std::sqrt(static_cast<double>(length));
    for (int k = 0; k < count; ++k) {
        for (int i = 0; i < length; ++i) {
            // Reduce the phase index exactly before converting to an angle.
            const long long idx = (static_cast<long long>(indices[static_cast<std::size_t>(i)]) * k) % count;
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(idx) / count;
            book.sequences_(i, k) = std::polar(scale, angle);
        }
    }
    return book;
}

PilotBook make_random_assignment_book(int length, int count, std::uint64_t seed)
{
    if (length < 1 || count < 1)
        throw ConfigError("pilot book needs length >= 1 and count >= 1");
    PilotBook book;
    book.kind_ = PilotKind::RandomAssignment;
    book.seed_ = seed;
    book.sequences_ = Eigen::MatrixXcd::Zero(length, count);
    book.assignment_.resize(static_cast<std::size_t>(count));
    Engine engine(derive_seed(seed, 0x727061ULL));
    std::uniform_int_distribution<int> pick(0, length - 1);
    for (int k = 0; k < count; ++k) {
        const int c = pick(engine);
        book.assignment_[static_cast<std::size_t>(k)] = c;
        book.sequences_(c, k) = 1.0;
    }
    return book;
}

PilotBook make_book(PilotKind kind, int length, int count, std::uint64_t seed)
{
    switch (kind) {
    case PilotKind::Orthogonal: return make_orthogonal_book(length, count);
    case PilotKind::Wbe: return make_wbe_book(length, count);
    case PilotKind::RandomAssignment: return make_random_assignment_book(length, count, seed);
    }
    throw ConfigError("unknown pilot kind");
}

double expected_cross_correlation(const PilotBook& book, int i, int j)
{
    if (i == j)
        throw std::domain_error("expected cross-correlation needs i != j");
    if (book.kind() == PilotKind::RandomAssignment)
        return 1.0 / book.length();
    return book.cross_correlation(i, j);
}

Eigen::MatrixXd expected_cross_correlations(const PilotBook& book)
{
    const int k = book.size();
    if (book.kind() == PilotKind::RandomAssignment) {
        Eigen::MatrixXd e = Eigen::MatrixXd::Constant(k, k, 1.0 / book.length());
        e.diagonal().setZero();
        return e;
    }
    const Eigen::MatrixXcd gram = book.sequences().adjoint() * book.sequences();
    Eigen::MatrixXd e = gram.cwiseAbs2();
    e.diagonal().setZero();
    return e;
}

GramStats gram_stats(const PilotBook& book)
{
    return gram_stats(book.sequences());
}

GramStats gram_stats(const Eigen::MatrixXcd& sequences)
{
    if (sequences.cols() < 1)
        throw ConfigError("empty pilot book");
    GramStats s;
    s.length = static_cast<int>(sequences.rows());
    const Eigen::MatrixXcd gram = sequences.adjoint() * sequences;
    s.phi = gram.cwiseAbs2();
    s.welch_sum = s.phi.sum();
    s.phi.diagonal().setZero();
    // Symmetrize away rounding so the self-adjoint solver sees an exact mirror.
    s.phi = 0.5 * (s.phi + s.phi.transpose()).eval();
    s.phi_bar = s.phi + Eigen::MatrixXd::Identity(sequences.cols(), sequences.cols());
    s.row_sums = s.phi_bar.rowwise().sum();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s.phi_bar, Eigen::EigenvaluesOnly);
    // Non-negative symmetric: the Perron root is the largest eigenvalue.
    s.spectral_radius = solver.eigenvalues().maxCoeff();
    return s;
}

bool error_feasible(const GramStats& stats, double e, Estimator estimator)
{
    // rho is only known to eigensolver accuracy; a bound within that of the
    // floor counts as the floor itself, which no finite power attains.
    constexpr double kBoundaryGuard = 1e-12;
    if (estimator == Estimator::LS) {
        if (!(e > 0.0))
            throw std::domain_error("LS target error must be positive");
        return stats.spectral_radius < (1.0 + e) * (1.0 - kBoundaryGuard);
    }
    if (!(e > 0.0 && e < 1.0))
        throw std::domain_error("LMMSE target error must lie in (0, 1)");
    return stats.spectral_radius < (1.0 - kBoundaryGuard) / (1.0 - e);
}

std::vector<double> min_power_vector(const GramStats& stats, std::span<const double> betas, double e,
                                     double noise, int pilot_length, Estimator estimator)
{
    const auto k = stats.phi_bar.rows();
    if (static_cast<Eigen::Index>(betas.size()) != k)
        throw ConfigError("one beta per pilot sequence required");
    if (!error_feasible(stats, e, estimator))
        throw InfeasibleError("target error not reachable: spectral radius too large");

    const double eta = noise / pilot_length;
    const double gain = estimator == Estimator::LS ? 1.0 / (1.0 + e) : 1.0 - e;
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(k, k) - gain * stats.phi_bar;
    const Eigen::VectorXd rhs = Eigen::VectorXd::Constant(k, gain * eta);
    const Eigen::VectorXd mu = system.partialPivLu().solve(rhs);

    std::vector<double> q(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) {
        const double b = betas[static_cast<std::size_t>(i)];
        if (!(b > 0.0))
            throw ConfigError("betas must be positive");
        if (!(mu(i) > 0.0) || !std::isfinite(mu(i)))
            throw InfeasibleError("power system is numerically singular");
        q[static_cast<std::size_t>(i)] = mu(i) / b;
    }
    return q;
}

std::vector<double> closed_form_power(std::span<const double> betas, double e, double noise, int pilot_length,
                                      int machines, Estimator estimator)
{
    double numerator = noise;
    double denominator = 0.0;
    if (estimator == Estimator::LS) {
        if (!(e > 0.0))
            throw std::domain_error("LS target error must be positive");
        denominator = pilot_length * (1.0 + e) - machines;
    } else {
        if (!(e > 0.0 && e < 1.0))
            throw std::domain_error("LMMSE target error must lie in (0, 1)");
        numerator *= 1.0 - e;
        denominator = pilot_length - machines * (1.0 - e);
    }
    if (!(denominator > 0.0))
        throw InfeasibleError("target error below the WBE floor");

    std::vector<double> q;
    q.reserve(betas.size());
    for (double b : betas) {
        if (!(b > 0.0))
            throw ConfigError("betas must be positive");
        q.push_back(numerator / (denominator * b));
    }
    return q;
}

double error_floor(int machines, int pilot_length, Estimator estimator)
{
    if (pilot_length < 1 || pilot_length > machines)
        throw std::domain_error("error floor needs 1 <= N_p <= K_m");
    const double gap = machines - pilot_length;
    return estimator == Estimator::LMMSE ? gap / machines : gap / pilot_length;
}

double welch_lower_bound(int pilot_length, int count)
{
    if (pilot_length < 1 || count < 0)
        throw std::domain_error("Welch bound needs N_p >= 1");
    const double k = count;
    return std::max(k, k * k / pilot_length);
}

void write_book_csv(const PilotBook& book, std::ostream& out)
{
    out << "# kind=" << to_string(book.kind()) << ",length=" << book.length() << ",count=" << book.size();
    if (book.kind() == PilotKind::Wbe) {
        out << ",u=";
        for (std::size_t i = 0; i < book.wbe_indices().size(); ++i)
            out << (i ? ";" : "") << book.wbe_indices()[i];
    }
    if (book.kind() == PilotKind::RandomAssignment)
        out << ",seed=" << book.seed();
    out << '\n';

    const auto old_precision = out.precision(17);
    for (int k = 0; k < book.size(); ++k) {
        for (int i = 0; i < book.length(); ++i) {
            const auto v = book.sequences()(i, k);
            out << (i ? "," : "") << v.real() << ',' << v.imag();
        }
        out << '\n';
    }
    out.precision(old_precision);
}

} // namespace mtcmimo
