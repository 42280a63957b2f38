#include "mtcmimo/pilots.hpp"
#include "mtcmimo/powerctl.hpp"
#include "mtcmimo/rates.hpp"
#include "mtcmimo/scenario.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace mtcmimo;

namespace {

SchemeConfig config(Scheme s, int n_h = 5, int n_m = 10)
{
    SchemeConfig c;
    c.scheme = s;
    c.human_pilot_length = n_h;
    c.machine_pilot_length = n_m;
    return c;
}

Scenario small_scenario(int antennas = 64, std::uint64_t seed = 4)
{
    SystemParams params;
    params.antennas = antennas;
    params.humans = 3;
    params.machines = 12;
    params.seed = seed;
    return place_devices(params);
}

// Spectral radius of a nonnegative matrix by plain power iteration.
double power_iteration(const Eigen::MatrixXd& a)
{
    Eigen::VectorXd v = Eigen::VectorXd::Ones(a.rows());
    double lambda = 0.0;
    for (int i = 0; i < 20000; ++i) {
        Eigen::VectorXd w = a * v;
        const double n = w.norm();
        if (n == 0.0)
            return 0.0;
        lambda = n / v.norm();
        v = w / n;
    }
    return lambda;
}

// Affine map T(p)_k = t_k I_k(p) / c_k assembled from the SINR terms.
struct AffineMap {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
};

AffineMap assemble(const RateModel& m, const std::vector<double>& t)
{
    const int k = m.size();
    auto eval = [&](const std::vector<double>& p) {
        Eigen::VectorXd out(k);
        std::vector<double> unit(static_cast<std::size_t>(k), 1.0);
        const auto at_unit = m.terms(0, unit);
        const auto terms = m.terms(0, p);
        for (int i = 0; i < k; ++i) {
            const double c = at_unit[static_cast<std::size_t>(i)].signal;
            out[i] = t[static_cast<std::size_t>(i)] * terms[static_cast<std::size_t>(i)].interference() / c;
        }
        return out;
    };
    AffineMap map;
    const std::vector<double> zero(static_cast<std::size_t>(k), 0.0);
    map.b = eval(zero);
    map.a.resize(k, k);
    for (int j = 0; j < k; ++j) {
        std::vector<double> e = zero;
        e[static_cast<std::size_t>(j)] = 1.0;
        map.a.col(j) = eval(e) - map.b;
    }
    return map;
}

} // namespace

TEST(SciPowers, CellEdgeGetsFullPower)
{
    const Scenario sc = small_scenario();
    const auto q = sci_pilot_powers(sc);
    for (int k = 0; k < sc.size(); ++k) {
        const double expected = sc.is_human(k) ? 1.0 : sc.beta_min() / sc.device(k).beta;
        EXPECT_DOUBLE_EQ(q[static_cast<std::size_t>(k)], expected);
        EXPECT_LE(q[static_cast<std::size_t>(k)], 1.0);
    }
    SystemParams params;
    const std::vector<double> h{}, mb{params.max_pilot_power_w * 0 + beta_from_distance(250.0)};
    const Scenario edge = Scenario::from_betas(params, h, mb);
    EXPECT_NEAR(sci_pilot_powers(edge)[0], 1.0, 1e-12);
}

TEST(Feasibility, SingleHumanClosedForm)
{
    SystemParams params;
    params.antennas = 50;
    const double beta = 1e-11, noise = params.noise_power_w;
    const std::vector<double> hb{beta}, none{};
    const Scenario sc = Scenario::from_betas(params, hb, none);
    SchemeConfig c = config(Scheme::SC1, 5, 0);
    c.alpha = 1.0;
    const RateModel m(sc, c, make_orthogonal_book(1, 0), {1.0});

    const double gamma = 5 * beta / (5 * beta + noise);
    const std::vector<double> p0{0.0};
    EXPECT_NEAR(m.gamma(0, p0), gamma, 1e-12);
    const double t_max = 50 * gamma * beta / (beta + noise);

    for (double frac : {0.1, 0.5, 0.9, 0.99}) {
        const std::vector<double> t{frac * t_max};
        const auto r = maxmin_feasible(m, t, 1.0);
        ASSERT_TRUE(r.feasible) << frac;
        const double p_star = t[0] * noise / (beta * (50 * gamma - t[0]));
        // The solver may return a certified super-solution just above p*.
        EXPECT_GE(r.p[0] / p_star, 1.0 - 1e-9);
        EXPECT_LE(r.p[0] / p_star, 1.0 + 1e-5);
        EXPECT_LE(target_violation(m, t, r.p), 1e-9);
        EXPECT_TRUE(r.monotone);
    }
    const std::vector<double> over{1.01 * t_max};
    EXPECT_FALSE(maxmin_feasible(m, over, 1.0).feasible);
}

TEST(Feasibility, AffineVerdictMatchesLinearAlgebra)
{
    const Scenario sc = small_scenario(32);
    const auto q = sci_pilot_powers(sc);
    for (Scheme s : {Scheme::SC1, Scheme::SC2}) {
        const RateModel m(sc, config(s, 3, 6), make_wbe_book(6, sc.machines()), q);
        int checked = 0;
        for (double th : {0.5, 2.0, 6.0})
            for (double tm = 0.02; tm < 3.0; tm *= 1.4) {
                std::vector<double> t(static_cast<std::size_t>(sc.size()), tm);
                std::fill_n(t.begin(), sc.humans(), th);
                const AffineMap map = assemble(m, t);
                const double rho = power_iteration(map.a);
                bool oracle = false;
                double margin = std::abs(rho - 1.0);
                if (rho < 1.0) {
                    const Eigen::VectorXd x =
                        (Eigen::MatrixXd::Identity(sc.size(), sc.size()) - map.a).partialPivLu().solve(map.b);
                    oracle = x.maxCoeff() <= 1.0;
                    margin = std::min(margin, std::abs(x.maxCoeff() - 1.0));
                }
                if (margin < 1e-4)
                    continue;
                const auto r = maxmin_feasible(m, t, 1.0);
                EXPECT_EQ(r.feasible, oracle) << to_string(s) << " th " << th << " tm " << tm << " rho " << rho;
                if (r.feasible) {
                    EXPECT_LE(target_violation(m, t, r.p), 1e-6);
                    EXPECT_TRUE(r.monotone);
                }
                ++checked;
            }
        EXPECT_GE(checked, 20);
    }
}

TEST(Feasibility, MonotoneInTargets)
{
    const Scenario sc = small_scenario(64);
    const auto q = sci_pilot_powers(sc);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Scheme s : {Scheme::SC2, Scheme::SC3}) {
        const RateModel m(sc, config(s, 3, 6), make_wbe_book(6, sc.machines()), q);
        for (int trial = 0; trial < 25; ++trial) {
            std::vector<double> t(static_cast<std::size_t>(sc.size()));
            for (auto& v : t)
                v = 3.0 * u(rng);
            const bool hi = maxmin_feasible(m, t, 1.0).feasible;
            std::vector<double> lower = t;
            for (auto& v : lower)
                v *= u(rng);
            const auto r = maxmin_feasible(m, lower, 1.0);
            if (hi) {
                EXPECT_TRUE(r.feasible) << to_string(s) << " trial " << trial;
            }
        }
    }
}

TEST(Feasibility, SchemeThreeExactRate)
{
    const Scenario sc = small_scenario(64);
    const auto q = sci_pilot_powers(sc);
    const RateModel m(sc, config(Scheme::SC3, 3, 6), make_wbe_book(6, sc.machines()), q);
    FeasibilityOptions opt;
    opt.sc3_human_rate = 2.0;
    std::vector<double> t(static_cast<std::size_t>(sc.size()), 0.3);
    const auto r = maxmin_feasible(m, t, 1.0, opt);
    ASSERT_TRUE(r.feasible);
    EXPECT_LE(target_violation(m, t, r.p, opt), 1e-6);
    for (int k = 0; k < sc.humans(); ++k) {
        const auto b = m.breakdown(k, r.p);
        EXPECT_GE(b.rate, 2.0 * (1 - 1e-6));
    }
    // The single-log requirement in each phase is stricter than the exact rate.
    std::vector<double> single = t;
    const double th = sinr_for_rate(2.0, m.prelogs(0));
    std::fill_n(single.begin(), sc.humans(), th);
    const auto s = maxmin_feasible(m, single, 1.0);
    if (s.feasible) {
        for (int k = 0; k < sc.humans(); ++k)
            EXPECT_LE(r.p[static_cast<std::size_t>(k)], s.p[static_cast<std::size_t>(k)] * (1 + 1e-6));
    }
}

TEST(SinrForRate, InvertsRate)
{
    const std::vector<double> pre{0.1, 0.85};
    const double t = sinr_for_rate(3.0, pre);
    const std::vector<double> s{t, t};
    EXPECT_NEAR(rate(pre, s), 3.0, 1e-12);
}

TEST(Bisection, MachineTargetBracketsAndMonotone)
{
    const Scenario sc = small_scenario(64);
    const auto q = sci_pilot_powers(sc);
    const RateModel m(sc, config(Scheme::SC2, 3, 6), make_wbe_book(6, sc.machines()), q);
    const double ub = machine_sinr_upper_bound(m, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double th : {0.5, 2.0, 8.0}) {
        const auto r = max_machine_target(m, th, 1.0);
        ASSERT_TRUE(r.feasible);
        EXPECT_LE(r.t_m, ub);
        EXPECT_LE(r.t_m, prev);
        EXPECT_LE(r.t_upper - r.t_m, 1e-6 * std::max(1.0, r.t_upper));
        std::vector<double> t(static_cast<std::size_t>(sc.size()), r.t_m);
        std::fill_n(t.begin(), sc.humans(), th);
        EXPECT_LE(target_violation(m, t, r.p), 1e-6);
        std::fill(t.begin() + sc.humans(), t.end(), r.t_upper * (1 + 1e-4));
        EXPECT_FALSE(maxmin_feasible(m, t, 1.0).feasible);
        prev = r.t_m;
    }
}

TEST(Region, MachineOnlyMatchesGridSearch)
{
    // Three machines, no humans: exhaustive search over a coarse power grid
    // can only do worse than the max-min optimum.
    SystemParams params;
    params.antennas = 8;
    params.humans = 0;
    params.machines = 3;
    params.seed = 21;
    const Scenario sc = place_devices(params);
    const auto q = sci_pilot_powers(sc);
    RegionOptions opt;
    opt.config = config(Scheme::SC2, 0, 2);
    opt.machine_pilot_lengths = {2};
    const RatePoint rp = maxmin_machine_rate(0.0, sc, q, opt);
    ASSERT_TRUE(rp.feasible);

    const RateModel m(sc, opt.config, make_wbe_book(2, 3), q);
    const auto pre = opt.config.machine_prelogs(3);
    double best = 0.0;
    const int steps = 40;
    for (int a = 1; a <= steps; ++a)
        for (int b = 1; b <= steps; ++b)
            for (int c = 1; c <= steps; ++c) {
                const std::vector<double> p{double(a) / steps, double(b) / steps, double(c) / steps};
                const auto t = m.terms(0, p);
                double worst = std::numeric_limits<double>::infinity();
                for (const auto& term : t)
                    worst = std::min(worst, pre[0] * std::log2(1 + term.sinr()));
                best = std::max(best, worst);
            }
    EXPECT_GE(rp.r_m, best - 1e-9);
    EXPECT_LE(rp.r_m, best * 1.05);
}

TEST(Region, WbeBeatsRandomAndFrontierDecreases)
{
    SystemParams params;
    params.antennas = 64;
    const Scenario sc = place_devices(params);
    const auto q = sci_pilot_powers(sc);
    RegionOptions wbe;
    wbe.config = config(Scheme::SC2);
    wbe.machine_pilot_lengths = {5, 10, 20};
    RegionOptions rpa = wbe;
    rpa.book = PilotKind::RandomAssignment;
    const std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
    const auto a = trace_rate_region(sc, q, grid, wbe);
    const auto b = trace_rate_region(sc, q, grid, rpa);
    ASSERT_EQ(a.size(), grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (b[i].feasible) {
            EXPECT_GE(a[i].r_m, b[i].r_m - 1e-6);
        }
        if (i > 0 && a[i].feasible) {
            EXPECT_LE(a[i].r_m, a[i - 1].r_m + 1e-9);
        }
    }
    std::ostringstream out;
    write_region_csv(a, sc, wbe, 1, out);
    EXPECT_NE(out.str().find('\n'), std::string::npos);
}

TEST(Region, OpaAndHumanRateLimit)
{
    SystemParams params;
    params.antennas = 64;
    const Scenario sc = place_devices(params);
    const auto q = sci_pilot_powers(sc);
    RegionOptions opt;
    opt.config = config(Scheme::OPA);
    opt.config.machine_pilot_length = 9;
    const double r_max = max_human_rate(sc, q, opt);
    EXPECT_GT(r_max, 0.0);
    EXPECT_TRUE(opa_machine_rate(0.5 * r_max, sc, q, opt).feasible);
    EXPECT_FALSE(opa_machine_rate(1.01 * r_max, sc, q, opt).feasible);
}
