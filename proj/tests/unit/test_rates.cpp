#include "mtcmimo/pilots.hpp"
#include "mtcmimo/powerctl.hpp"
#include "mtcmimo/rates.hpp"
#include "mtcmimo/scenario.hpp"
#include "mtcmimo/scheme.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace mtcmimo;

namespace {

SchemeConfig config(Scheme s, Receiver r = Receiver::MRC)
{
    SchemeConfig c;
    c.scheme = s;
    c.receiver = r;
    c.coherence_length = 100;
    c.human_pilot_length = 5;
    c.machine_pilot_length = 10;
    return c;
}

RateModel machines_only(Scheme s, int antennas, int machines = 20)
{
    SystemParams params;
    params.antennas = antennas;
    params.noise_power_w = 1.0;
    const std::vector<double> none, betas(static_cast<std::size_t>(machines), 1.0);
    SchemeConfig c = config(s);
    c.human_pilot_length = 0;
    c.alpha = 0.0;
    return RateModel(Scenario::from_betas(params, none, betas), c, make_wbe_book(10, machines),
                     std::vector<double>(static_cast<std::size_t>(machines), 1.0));
}

RateModel reference_model(Scheme s, Receiver r, int antennas)
{
    SystemParams params;
    params.antennas = antennas;
    const Scenario sc = place_devices(params);
    return RateModel(sc, config(s, r), make_wbe_book(10, sc.machines()), sci_pilot_powers(sc));
}

} // namespace

TEST(Rate, PrelogTimesLog)
{
    SchemeConfig c = config(Scheme::SC1);
    c.alpha = 1.0;
    const double sinr = 3.0;
    EXPECT_NEAR(rate(c.human_prelogs(), std::span<const double>(&sinr, 1)), 1.9, 1e-12);
    const std::vector<double> bad{0.0}, one{1.0};
    EXPECT_THROW(rate(bad, one), ConfigError);
}

TEST(Prelogs, SchemesAndOpaGroups)
{
    SchemeConfig c = config(Scheme::SC3);
    EXPECT_EQ(c.human_prelogs().size(), 2u);
    EXPECT_NEAR(c.human_prelogs()[0] + c.human_prelogs()[1], 0.95, 1e-15);
    c.sc3_identical_machine_powers = true;
    EXPECT_EQ(c.human_prelogs().size(), 1u);

    SchemeConfig opa = config(Scheme::OPA);
    opa.machine_pilot_length = 9;
    EXPECT_EQ(opa.opa_group_count(45), 5);
    EXPECT_NEAR(opa.machine_prelogs(45)[0], (100.0 - 14.0) / 100.0 / 5.0, 1e-15);
    EXPECT_EQ(opa_group_members(45, 9, 4).size(), 9u);
    EXPECT_EQ(opa_group_members(47, 9, 5).size(), 2u);
}

TEST(GammaBar, RowSumSubstitution)
{
    const PilotBook book = make_wbe_book(10, 20);
    const std::vector<double> beta(20, 2.0), q(20, 0.25);
    const auto g = gamma_bar(book, beta, q, 0.3, 10);
    const double nqb = 10 * 0.25 * 2.0;
    for (double v : g)
        EXPECT_NEAR(v, nqb / (nqb * 2.0 + 0.3), 1e-12);
}

TEST(Asymptotics, EqualPowersGiveUnitLimit)
{
    const RateModel sc2 = machines_only(Scheme::SC2, 100000);
    const RateModel sc1 = machines_only(Scheme::SC1, 100000);
    const std::vector<double> p(20, 1.0);
    for (int k = 0; k < 20; ++k) {
        EXPECT_NEAR(sc2.asymptotic_sinr(k, p), 1.0, 1e-12);
        EXPECT_DOUBLE_EQ(sc1.asymptotic_sinr(k, p), sc2.asymptotic_sinr(k, p));
        EXPECT_NEAR(sc2.sinr(k, 0, p), 1.0, 0.01);
    }
}

TEST(Asymptotics, SchemeOneAndTwoCoincideOnRandomInputs)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    SystemParams params;
    const Scenario sc = place_devices(params);
    const PilotBook book = make_wbe_book(10, sc.machines());
    std::vector<double> q(static_cast<std::size_t>(sc.size())), p(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] = u(rng);
        p[i] = u(rng);
    }
    const RateModel a(sc, config(Scheme::SC1), book, q);
    const RateModel b(sc, config(Scheme::SC2), book, q);
    for (int k = sc.humans(); k < sc.size(); ++k)
        EXPECT_DOUBLE_EQ(asymptotic_sinr_machine(a, k, p), asymptotic_sinr_machine(b, k, p));
    EXPECT_THROW(a.asymptotic_sinr(0, p), ConfigError);
}

TEST(HumanSinr, SchemeTwoHasNoCoherentHumanTerm)
{
    const RateModel m = reference_model(Scheme::SC2, Receiver::MRC, 100);
    const std::vector<double> p(50, 1.0);
    const auto t = m.terms(0, p);
    for (int k = 0; k < 5; ++k)
        EXPECT_EQ(t[static_cast<std::size_t>(k)].coherent, 0.0);
}

TEST(HumanSinr, ZfAtLeastMrcWithSciPowers)
{
    for (Scheme s : {Scheme::SC1, Scheme::SC2, Scheme::SC3}) {
        const RateModel mrc = reference_model(s, Receiver::MRC, 200);
        const RateModel zf = reference_model(s, Receiver::ZF, 200);
        std::vector<double> p;
        for (const auto& d : mrc.scenario().devices())
            p.push_back(mrc.scenario().beta_min() / d.beta);
        for (int k = 0; k < 5; ++k)
            for (int phase = 0; phase < mrc.phases(k); ++phase)
                EXPECT_GE(zf.sinr(k, phase, p), mrc.sinr(k, phase, p)) << to_string(s);
    }
}

TEST(HumanSinr, ZfLosesArrayGainWhenMachinesDominate)
{
    // With every device at full power the machine interference swamps the
    // human terms that ZF removes, and the M - K_h gain makes ZF worse.
    const RateModel mrc = reference_model(Scheme::SC2, Receiver::MRC, 200);
    const RateModel zf = reference_model(Scheme::SC2, Receiver::ZF, 200);
    const std::vector<double> p(50, 1.0);
    for (int k = 0; k < 5; ++k) {
        EXPECT_LT(zf.sinr(k, 0, p), mrc.sinr(k, 0, p));
        EXPECT_GT(zf.sinr(k, 0, p), mrc.sinr(k, 0, p) * 195.0 / 200.0);
    }
}

TEST(HumanSinr, FormulaSubstitution)
{
    // One human plus two machines under SC1: no cross-class terms.
    const std::vector<double> hp{0.7, 0.2}, hb{1e-10, 3e-11};
    const double mrc = human_sinr_formula(100, 1e-10, 0.7, 0.9, hp, hb, 0.0, 2e-13);
    EXPECT_NEAR(mrc, 100 * 1e-10 * 0.7 * 0.9 / (0.7e-10 + 0.2 * 3e-11 + 2e-13), 1e-9);
}

TEST(RateModel, HumanTermsArePrefixAndLowerTermsBound)
{
    const RateModel m = reference_model(Scheme::SC3, Receiver::MRC, 100);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> anchor(50), p(50);
        for (std::size_t i = 0; i < 50; ++i) {
            anchor[i] = 0.5 * u(rng);
            p[i] = anchor[i] + 0.5 * u(rng);
        }
        for (int phase = 0; phase < 2; ++phase) {
            const auto full = m.terms(phase, p);
            const auto human = m.human_terms(phase, p);
            ASSERT_EQ(human.size(), 5u);
            for (std::size_t k = 0; k < 5; ++k)
                EXPECT_EQ(human[k].sinr(), full[k].sinr());

            const auto at_anchor = m.lower_terms(phase, anchor, anchor);
            const auto exact_anchor = m.terms(phase, anchor);
            const auto lower = m.lower_terms(phase, p, anchor);
            for (std::size_t k = 0; k < full.size(); ++k) {
                EXPECT_NEAR(at_anchor[k].interference(), exact_anchor[k].interference(),
                            1e-9 * exact_anchor[k].interference());
                EXPECT_LE(lower[k].interference(), full[k].interference() * (1 + 1e-12));
            }
        }
    }
}

TEST(RateModel, SinrMonotoneInOwnPowerAndAntennas)
{
    const std::vector<double> p(50, 0.5);
    for (Scheme s : {Scheme::SC1, Scheme::SC2, Scheme::SC3}) {
        const RateModel small = reference_model(s, Receiver::MRC, 50);
        const RateModel large = reference_model(s, Receiver::MRC, 400);
        for (int k = 0; k < 50; ++k) {
            EXPECT_GT(large.sinr(k, 0, p), small.sinr(k, 0, p));
            std::vector<double> up = p;
            up[static_cast<std::size_t>(k)] = 1.0;
            EXPECT_GT(small.sinr(k, 0, up), small.sinr(k, 0, p));
        }
    }
}

TEST(MonteCarlo, AgreesWithClosedForm)
{
    SystemParams params;
    params.antennas = 30;
    params.humans = 2;
    params.machines = 8;
    const Scenario sc = place_devices(params);
    SchemeConfig c = config(Scheme::SC3);
    c.human_pilot_length = 2;
    c.machine_pilot_length = 4;
    const RateModel m(sc, c, make_wbe_book(4, 8), sci_pilot_powers(sc));
    const std::vector<double> p(10, 1.0);
    McOptions opt;
    opt.trials = 4000;
    const auto mc = mc_use_and_forget(m, p, opt);
    ASSERT_FALSE(mc.empty());
    for (const auto& r : mc) {
        const double cf = m.sinr(r.device, r.phase, p);
        EXPECT_LE(std::abs(r.sinr - cf), 4.5 * r.std_error + 1e-3 * cf)
            << "device " << r.device << " phase " << r.phase;
    }
}

TEST(MonteCarlo, DeterministicAcrossWorkers)
{
    SystemParams params;
    params.antennas = 16;
    params.humans = 1;
    params.machines = 6;
    const Scenario sc = place_devices(params);
    const RateModel m(sc, config(Scheme::SC2), make_random_assignment_book(10, 6, 2), sci_pilot_powers(sc));
    const std::vector<double> p(7, 1.0);
    McOptions opt;
    opt.trials = 300;
    const auto a = mc_use_and_forget(m, p, opt);
    opt.workers = 4;
    const auto b = mc_use_and_forget(m, p, opt);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(a[i].sinr, b[i].sinr);
}

TEST(RatesCsv, OneRowPerDevice)
{
    const RateModel m = reference_model(Scheme::SC2, Receiver::MRC, 100);
    const std::vector<double> p(50, 1.0);
    const auto rows = m.evaluate(p);
    std::ostringstream out;
    write_rates_csv(m, rows, 1, out);
    int lines = 0;
    for (char ch : out.str())
        lines += ch == '\n';
    EXPECT_EQ(lines, 51);
}
