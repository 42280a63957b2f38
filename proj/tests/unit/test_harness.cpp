#include "mtcmimo/harness.hpp"
#include "mtcmimo/types.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace mtcmimo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("mtcmimo_test_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentSpec small_fig1()
{
    ExperimentSpec s = default_spec("fig1");
    s.trials = 200;
    s.snr_db = {0, 40};
    return s;
}

ExperimentSpec small_fig4()
{
    ExperimentSpec s = default_spec("fig4");
    s.antennas = {32};
    s.params.humans = 2;
    s.params.machines = 8;
    s.pilot_lengths = {4, 8};
    s.r_h_points = 3;
    s.schemes = {Scheme::SC1, Scheme::SC2};
    s.receivers = {Receiver::MRC};
    return s;
}

} // namespace

TEST(Harness, FigureIdsHaveDefaults)
{
    EXPECT_EQ(figure_ids().size(), 7u);
    for (const auto& id : figure_ids())
        EXPECT_EQ(default_spec(id).figure, id);
    EXPECT_THROW(default_spec("fig9"), ConfigError);
    EXPECT_EQ(parse_placement(to_string(PlacementMode::PerDrop)), PlacementMode::PerDrop);
    EXPECT_FALSE(version().empty());
}

TEST(Harness, NmseFigureWritesCsvAndMeta)
{
    ExperimentSpec s = small_fig1();
    s.output_dir = scratch("fig1").string();
    const auto out = run_experiment(s);
    EXPECT_EQ(out.rows, 8u);
    const auto meta = nlohmann::json::parse(slurp(out.meta_path));
    EXPECT_EQ(meta["figure"], "fig1");
    EXPECT_EQ(meta["seed"], 1);
    EXPECT_EQ(meta["trials"], 200);
    EXPECT_FALSE(slurp(out.csv_path).empty());
}

TEST(Harness, DeterministicAcrossRunsAndWorkers)
{
    for (auto make : {small_fig1, small_fig4}) {
        ExperimentSpec a = make();
        a.output_dir = scratch("det_a").string();
        ExperimentSpec b = make();
        b.output_dir = scratch("det_b").string();
        b.workers = 3;
        const auto ra = run_experiment(a);
        const auto rb = run_experiment(b);
        EXPECT_EQ(slurp(ra.csv_path), slurp(rb.csv_path)) << a.figure;
        const auto rc = run_experiment(a);
        EXPECT_EQ(slurp(ra.csv_path), slurp(rc.csv_path)) << a.figure;
    }
}

TEST(Harness, SeedChangesPlacement)
{
    ExperimentSpec s = small_fig4();
    const auto a = experiment_scenario(s).betas();
    s.seed = 2;
    EXPECT_NE(a, experiment_scenario(s).betas());
    s.placement = PlacementMode::PerDrop;
    s.drops = 3;
    EXPECT_NE(experiment_scenario(s, 0).betas(), experiment_scenario(s, 1).betas());
}

TEST(Harness, RejectsInvalidSpecs)
{
    ExperimentSpec s = small_fig1();
    s.output_dir = scratch("bad").string();
    s.figure = "fig0";
    EXPECT_THROW(run_experiment(s), ConfigError);
    s = small_fig1();
    s.drops = 0;
    EXPECT_THROW(run_experiment(s), ConfigError);
    s = small_fig4();
    s.drops = 2;  // fixed placement means one drop
    EXPECT_THROW(run_experiment(s), ConfigError);
    s = small_fig1();
    s.trials = 0;
    EXPECT_THROW(run_experiment(s), ConfigError);
}

TEST(Harness, UnwritableOutputDirectory)
{
    ExperimentSpec s = small_fig1();
    s.output_dir = "/proc/mtcmimo_no_such_dir/out";
    EXPECT_THROW(run_experiment(s), std::runtime_error);
}
