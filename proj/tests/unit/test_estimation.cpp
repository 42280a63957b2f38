#include "mtcmimo/estimation.hpp"
#include "mtcmimo/pilots.hpp"
#include "mtcmimo/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

using namespace mtcmimo;

namespace {

TrainingWindow machine_window(const PilotBook& book)
{
    TrainingWindow w;
    w.pilots = book.sequences();
    w.trainers.resize(static_cast<std::size_t>(book.size()));
    std::iota(w.trainers.begin(), w.trainers.end(), 0);
    return w;
}

} // namespace

TEST(Training, NoiseOnlyVariance)
{
    const PilotBook book = make_wbe_book(10, 20);
    const TrainingWindow w = machine_window(book);
    GaussianSource g(11);
    const std::vector<double> beta(20, 1.0), zero(20, 0.0);
    const double noise = 2.5;
    double sum = 0.0;
    long long n = 0;
    for (int t = 0; t < 50; ++t) {
        const auto fading = draw_fading(200, 20, g);
        const auto obs = synthesize_training(w, fading, beta, zero, zero, noise, g);
        sum += obs.received.squaredNorm();
        n += obs.received.size();
    }
    EXPECT_NEAR(sum / n / noise, 1.0, 0.02);
}

TEST(Training, DespreadSecondMomentMatchesAnalytic)
{
    const PilotBook book = make_wbe_book(10, 20);
    const TrainingWindow w = machine_window(book);
    const std::vector<double> beta(20, 1.0), q(20, 1.0), zero(20, 0.0);
    const double noise = 1.0;
    GaussianSource g(12);
    double sum = 0.0;
    const int trials = 2000, m = 50;
    for (int t = 0; t < trials; ++t) {
        const auto fading = draw_fading(m, 20, g);
        const auto obs = synthesize_training(w, fading, beta, q, zero, noise, g);
        sum += despread(obs.received, book.sequence(3)).squaredNorm() / m;
    }
    // N_p sum_k q beta |phi_k^H phi_3|^2 + sigma^2 = 10 * 2 + 1.
    const double analytic = despread_variance(w, 3, beta, q, zero, noise);
    EXPECT_NEAR(analytic, 21.0, 1e-9);
    EXPECT_NEAR(sum / trials / analytic, 1.0, 0.02);
}

TEST(Estimators, HighSnrFloors)
{
    const PilotBook book = make_wbe_book(10, 20);
    const std::vector<double> beta(20, 1.0), q(20, 1e6);
    const auto ls = analytic_ls_errors(book, beta, q, 1.0, 10);
    const auto gam = analytic_gammas(book, beta, q, 1.0, 10);
    for (int k = 0; k < 20; ++k) {
        EXPECT_NEAR(ls[k], 1.0, 1e-5);
        EXPECT_NEAR(1.0 - gam[k], 0.5, 1e-5);
    }
}

TEST(Estimators, MonteCarloErrorMatchesAnalytic)
{
    const PilotBook book = make_wbe_book(10, 20);
    const TrainingWindow w = machine_window(book);
    const std::vector<double> beta(20, 1.0), q(20, 0.5), zero(20, 0.0);
    const double noise = 1.0;
    const int m = 20, trials = 10000;
    GaussianSource g(13);
    double ls_err = 0.0, mmse_err = 0.0;
    double var = despread_variance(w, 0, beta, q, zero, noise);
    for (int t = 0; t < trials; ++t) {
        const auto fading = draw_fading(m, 20, g);
        const auto obs = synthesize_training(w, fading, beta, q, zero, noise, g);
        const auto y = despread(obs.received, book.sequence(0));
        ls_err += (estimate_ls(y, 1.0, 0.5, 10, var).h_hat - fading.col(0)).squaredNorm() / m;
        mmse_err += (estimate_lmmse(y, 1.0, 0.5, 10, var).h_hat - fading.col(0)).squaredNorm() / m;
    }
    const auto ls = estimate_ls(Eigen::VectorXcd::Zero(1), 1.0, 0.5, 10, var);
    const auto mmse = estimate_lmmse(Eigen::VectorXcd::Zero(1), 1.0, 0.5, 10, var);
    EXPECT_NEAR(ls_err / trials / ls.error_ms, 1.0, 0.03);
    EXPECT_NEAR(mmse_err / trials / mmse.error_ms, 1.0, 0.03);
    EXPECT_NEAR(mmse.error_ms, 1.0 - mmse.gamma, 1e-15);
    EXPECT_THROW(estimate_ls(Eigen::VectorXcd::Zero(1), 0.0, 0.5, 10, var), std::domain_error);
}

TEST(Estimators, OverlapRaisesError)
{
    const PilotBook book = make_wbe_book(10, 20);
    const std::vector<double> beta(20, 1.0), q(20, 1.0);
    const auto clean = analytic_gammas(book, beta, q, 1.0, 10);
    const auto loaded = analytic_gammas(book, beta, q, 1.0, 10, 5.0);
    EXPECT_LT(loaded[0], clean[0]);
    // gamma-bar with equal beta q: N_p q / (N_p q K_m / N_p + sigma^2) = 10 / 21.
    EXPECT_NEAR(clean[0], 10.0 / 21.0, 1e-12);
}

TEST(Nmse, HighSnrAndOrdering)
{
    NmseConfig cfg;
    cfg.trials = 2000;
    cfg.snr_db = {0, 20, 40};
    const auto mmse = nmse_curve(cfg);
    cfg.estimator = Estimator::LS;
    const auto ls = nmse_curve(cfg);
    EXPECT_NEAR(mmse.back().nmse / 0.5, 1.0, 0.02);
    EXPECT_NEAR(ls.back().nmse / 1.0, 1.0, 0.02);
    for (std::size_t i = 0; i < ls.size(); ++i)
        EXPECT_LE(mmse[i].nmse, ls[i].nmse);

    cfg.kind = PilotKind::RandomAssignment;
    cfg.estimator = Estimator::LMMSE;
    const auto rpa = nmse_curve(cfg);
    EXPECT_GT(rpa.back().nmse, mmse.back().nmse);
}

TEST(Nmse, DeterministicAcrossWorkers)
{
    NmseConfig cfg;
    cfg.trials = 300;
    cfg.snr_db = {10};
    cfg.kind = PilotKind::RandomAssignment;
    const auto a = nmse_curve(cfg);
    cfg.workers = 3;
    const auto b = nmse_curve(cfg);
    EXPECT_EQ(a[0].nmse, b[0].nmse);
    std::ostringstream oa, ob;
    write_nmse_csv(cfg, a, oa);
    write_nmse_csv(cfg, b, ob);
    EXPECT_EQ(oa.str(), ob.str());
}

TEST(Windows, SchemeLayouts)
{
    const PilotBook book = make_wbe_book(10, 45);
    SchemeConfig c;
    c.scheme = Scheme::SC2;
    const auto sc2 = training_windows(c, 5, book);
    ASSERT_EQ(sc2.size(), 1u);
    EXPECT_EQ(sc2[0].length(), 15);
    EXPECT_EQ(sc2[0].trainers.size(), 50u);
    EXPECT_TRUE(sc2[0].overlapping.empty());

    c.scheme = Scheme::SC3;
    const auto sc3 = training_windows(c, 5, book);
    ASSERT_EQ(sc3.size(), 2u);
    EXPECT_EQ(sc3[1].length(), 10);
    EXPECT_EQ(sc3[1].overlapping.size(), 5u);
}
