#include "mtcmimo/pilots.hpp"
#include "mtcmimo/types.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

using namespace mtcmimo;

namespace {

double brute_welch_sum(const Eigen::MatrixXcd& s)
{
    double total = 0.0;
    for (int i = 0; i < s.cols(); ++i)
        for (int j = 0; j < s.cols(); ++j) {
            std::complex<double> dot = 0.0;
            for (int r = 0; r < s.rows(); ++r)
                dot += std::conj(s(r, i)) * s(r, j);
            total += std::norm(dot);
        }
    return total;
}

double dense_spectral_radius(const Eigen::MatrixXd& a)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace

TEST(WbeBook, UnitNormAndWelchEquality)
{
    const PilotBook book = make_wbe_book(10, 20);
    EXPECT_EQ(book.kind(), PilotKind::Wbe);
    for (int k = 0; k < 20; ++k)
        EXPECT_NEAR(book.sequence(k).norm(), 1.0, 1e-12);
    EXPECT_NEAR(brute_welch_sum(book.sequences()), 40.0, 1e-9);

    const GramStats g = gram_stats(book);
    EXPECT_NEAR(g.welch_sum, 40.0, 1e-9);
    EXPECT_NEAR(g.spectral_radius, 2.0, 1e-9);
    for (int i = 0; i < 20; ++i) {
        EXPECT_NEAR(g.row_sums[i], 2.0, 1e-9);
        EXPECT_NEAR(g.phi.row(i).sum(), 1.0, 1e-9);
    }
}

TEST(WbeBook, ExplicitIndicesAndValidation)
{
    const std::vector<int> u{1, 3, 5, 7, 9, 11, 13, 15, 17, 19};
    const GramStats g = gram_stats(make_wbe_book(10, 20, u));
    EXPECT_NEAR(g.welch_sum, 40.0, 1e-9);
    const std::vector<int> dup{1, 21, 2};
    EXPECT_THROW(make_wbe_book(3, 20, dup), ConfigError);
}

TEST(WbeBook, SpectralRadiusMatchesDenseEigensolver)
{
    for (auto [n, k] : {std::pair{5, 45}, {10, 20}, {10, 45}, {20, 45}, {7, 13}}) {
        const GramStats g = gram_stats(make_wbe_book(n, k));
        EXPECT_NEAR(g.spectral_radius, dense_spectral_radius(g.phi_bar), 1e-9);
        EXPECT_NEAR(g.spectral_radius, static_cast<double>(k) / n, 1e-9);
    }
}

TEST(OrthogonalBook, IdentityGram)
{
    const PilotBook book = make_orthogonal_book(8, 5);
    const GramStats g = gram_stats(book);
    EXPECT_NEAR(g.phi.cwiseAbs().maxCoeff(), 0.0, 1e-15);
    EXPECT_NEAR(g.spectral_radius, 1.0, 1e-12);
    EXPECT_THROW(make_orthogonal_book(4, 5), ConfigError);
}

TEST(RandomBook, CollisionProbability)
{
    const int draws = 100000;
    int hits = 0;
    for (int s = 0; s < draws; ++s)
        hits += make_random_assignment_book(10, 2, static_cast<std::uint64_t>(s)).cross_correlation(0, 1) > 0.5;
    EXPECT_NEAR(static_cast<double>(hits) / draws, 0.1, 0.003);
    const PilotBook book = make_random_assignment_book(10, 20, 3);
    EXPECT_DOUBLE_EQ(expected_cross_correlation(book, 0, 1), 0.1);
    EXPECT_THROW(expected_cross_correlation(book, 2, 2), std::domain_error);
}

TEST(RandomBook, SpectralRadiusAboveWelch)
{
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const GramStats g = gram_stats(make_random_assignment_book(10, 20, seed));
        EXPECT_NEAR(g.spectral_radius, dense_spectral_radius(g.phi_bar), 1e-9);
        EXPECT_GE(g.spectral_radius, 2.0 - 1e-12);
    }
}

TEST(RandomBook, RedrawIsDeterministic)
{
    const PilotBook a = make_random_assignment_book(10, 20, 5);
    EXPECT_EQ(a.redraw(9).assignment(), make_random_assignment_book(10, 20, 9).assignment());
    EXPECT_EQ(a.redraw(5).assignment(), a.assignment());
}

TEST(ErrorFeasibility, StrictConditions)
{
    const GramStats g = gram_stats(make_wbe_book(10, 20));
    EXPECT_TRUE(error_feasible(g, 1.01, Estimator::LS));
    EXPECT_FALSE(error_feasible(g, 1.0, Estimator::LS));
    EXPECT_FALSE(error_feasible(g, 0.5, Estimator::LMMSE));
    EXPECT_TRUE(error_feasible(g, 0.51, Estimator::LMMSE));
}

TEST(MinPower, ClosedFormHandValues)
{
    const std::vector<double> betas(20, 1.0);
    const auto ls = closed_form_power(betas, 1.5, 2e-13, 10, 20, Estimator::LS);
    const auto mmse = closed_form_power(betas, 0.6, 2e-13, 10, 20, Estimator::LMMSE);
    EXPECT_NEAR(ls[0] / 4e-14, 1.0, 1e-12);
    EXPECT_NEAR(mmse[0] / 4e-14, 1.0, 1e-12);
}

TEST(MinPower, LinearSolveMatchesClosedFormOnWbe)
{
    const GramStats g = gram_stats(make_wbe_book(10, 20));
    std::vector<double> betas;
    for (int k = 0; k < 20; ++k)
        betas.push_back(1e-10 * (1 + k));
    for (Estimator e : {Estimator::LS, Estimator::LMMSE}) {
        const double err = e == Estimator::LS ? 1.5 : 0.6;
        const auto solved = min_power_vector(g, betas, err, 2e-13, 10, e);
        const auto closed = closed_form_power(betas, err, 2e-13, 10, 20, e);
        for (int k = 0; k < 20; ++k)
            EXPECT_NEAR(solved[k] / closed[k], 1.0, 1e-9);
    }
    EXPECT_THROW(min_power_vector(g, betas, 0.5, 2e-13, 10, Estimator::LMMSE), InfeasibleError);
}

TEST(MinPower, OrthogonalSingleUser)
{
    // One device: e = sigma^2 / (N_p q beta + sigma^2) for LMMSE.
    const GramStats g = gram_stats(make_orthogonal_book(4, 1));
    const std::vector<double> beta{3e-11};
    const double e = 0.2;
    const auto q = min_power_vector(g, beta, e, 2e-13, 4, Estimator::LMMSE);
    EXPECT_NEAR(2e-13 / (4 * q[0] * beta[0] + 2e-13), e, 1e-12);
}

TEST(ErrorFloor, HandValues)
{
    EXPECT_DOUBLE_EQ(error_floor(20, 10, Estimator::LMMSE), 0.5);
    EXPECT_DOUBLE_EQ(error_floor(20, 10, Estimator::LS), 1.0);
    EXPECT_DOUBLE_EQ(welch_lower_bound(10, 20), 40.0);
    EXPECT_DOUBLE_EQ(welch_lower_bound(1, 5), 25.0);
    EXPECT_DOUBLE_EQ(welch_lower_bound(10, 5), 5.0);
}

TEST(BookCsv, HeaderAndRows)
{
    std::ostringstream out;
    write_book_csv(make_wbe_book(4, 6), out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.front(), '#');
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty() && line.front() != '#')
            ++rows;
    EXPECT_GE(rows, 6);
}
