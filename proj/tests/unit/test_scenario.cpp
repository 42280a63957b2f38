#include "mtcmimo/random.hpp"
#include "mtcmimo/scenario.hpp"
#include "mtcmimo/types.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace mtcmimo;

TEST(PathLoss, CellEdgeAndMinimumDistance)
{
    // 130 + 37.6 log10(0.25) and 130 + 37.6 log10(0.02), worked by hand.
    EXPECT_NEAR(path_loss_db(250.0), 107.36254, 1e-4);
    EXPECT_NEAR(path_loss_db(20.0), 66.11873, 1e-4);
}

TEST(PathLoss, BetaIsInverseOfDbLoss)
{
    EXPECT_NEAR(beta_from_distance(250.0), 1.836e-11, 1e-14);
    EXPECT_NEAR(beta_from_distance(20.0) / 2.444e-7, 1.0, 1e-3);
    EXPECT_GT(beta_from_distance(100.0), beta_from_distance(200.0));
}

TEST(Placement, CountsOrderingAndBounds)
{
    SystemParams params;
    const Scenario s = place_devices(params);
    ASSERT_EQ(s.size(), 50);
    const double lo = beta_from_distance(250.0);
    const double hi = beta_from_distance(20.0);
    for (int k = 0; k < s.size(); ++k) {
        EXPECT_EQ(s.device(k).id, k);
        EXPECT_EQ(s.device(k).cls, k < 5 ? DeviceClass::Human : DeviceClass::Machine);
        EXPECT_GE(s.device(k).distance_m, 20.0);
        EXPECT_LE(s.device(k).distance_m, 250.0);
        EXPECT_GE(s.device(k).beta, lo * (1 - 1e-12));
        EXPECT_LE(s.device(k).beta, hi * (1 + 1e-12));
    }
    EXPECT_DOUBLE_EQ(s.beta_min(), lo);
}

TEST(Placement, DeterministicInSeed)
{
    SystemParams params;
    params.seed = 42;
    const auto a = place_devices(params).betas();
    const auto b = place_devices(params).betas();
    EXPECT_EQ(a, b);
    params.seed = 43;
    EXPECT_NE(a, place_devices(params).betas());
}

TEST(Placement, AreaUniformRadialLaw)
{
    // P(d <= r) = (r^2 - r0^2) / (R^2 - r0^2) for a uniform draw over the annulus.
    SystemParams params;
    params.humans = 0;
    params.machines = 4000;
    const Scenario s = place_devices(params);
    const double r = 150.0;
    int inside = 0;
    for (const auto& d : s.devices())
        inside += d.distance_m <= r ? 1 : 0;
    const double expected = (r * r - 400.0) / (62500.0 - 400.0);
    const double sd = std::sqrt(expected * (1 - expected) / 4000.0);
    EXPECT_NEAR(inside / 4000.0, expected, 4 * sd);
}

TEST(Scenario, RejectsBadParameters)
{
    SystemParams params;
    params.antennas = 0;
    EXPECT_THROW(params.validate(), ConfigError);
    params = {};
    params.min_distance_m = 300.0;
    EXPECT_THROW(params.validate(), ConfigError);
    params = {};
    std::vector<Device> devices{{0, DeviceClass::Machine, 0.0, 1.0}};
    params.humans = 1;
    params.machines = 0;
    EXPECT_THROW(Scenario(params, devices), ConfigError);
}

TEST(Scenario, JsonRoundTrip)
{
    SystemParams params;
    params.seed = 7;
    const Scenario s = place_devices(params);
    std::stringstream buf;
    save_scenario(s, buf);
    const Scenario t = load_scenario(buf);
    EXPECT_EQ(t.betas(), s.betas());
    EXPECT_EQ(t.humans(), s.humans());
    EXPECT_EQ(t.antennas(), s.antennas());
    EXPECT_DOUBLE_EQ(t.noise(), s.noise());
}

TEST(Scenario, SubsetAndAntennas)
{
    const Scenario s = place_devices({});
    const std::vector<int> ids{0, 1, 7, 9};
    const Scenario sub = s.subset(ids);
    EXPECT_EQ(sub.humans(), 2);
    EXPECT_EQ(sub.machines(), 2);
    EXPECT_DOUBLE_EQ(sub.device(2).beta, s.device(7).beta);
    EXPECT_EQ(s.with_antennas(400).antennas(), 400);
}

TEST(Types, ParseRoundTrip)
{
    for (Scheme sc : {Scheme::SC1, Scheme::SC2, Scheme::SC3, Scheme::OPA})
        EXPECT_EQ(parse_scheme(to_string(sc)), sc);
    for (PilotKind k : {PilotKind::Orthogonal, PilotKind::Wbe, PilotKind::RandomAssignment})
        EXPECT_EQ(parse_pilot_kind(to_string(k)), k);
    EXPECT_EQ(parse_receiver(to_string(Receiver::ZF)), Receiver::ZF);
    EXPECT_EQ(parse_estimator(to_string(Estimator::LS)), Estimator::LS);
    EXPECT_THROW(parse_scheme("sc9"), ConfigError);
}

TEST(Random, DerivedSeedsDiffer)
{
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
    EXPECT_EQ(derive_seed(5, 3, 2), derive_seed(5, 3, 2));
}

TEST(Random, BatchMeansIndependentOfWorkers)
{
    auto body = [](long long t, Eigen::Ref<Eigen::VectorXd> out) {
        GaussianSource g(derive_seed(9, 0, static_cast<std::uint64_t>(t)));
        out[0] = std::norm(g.complex());
    };
    const auto a = run_batches(5000, 1, 1, body);
    const auto b = run_batches(5000, 1, 3, body);
    EXPECT_EQ(a.mean()[0], b.mean()[0]);
    EXPECT_NEAR(a.mean()[0], 1.0, 4 * a.std_error(0));
}
