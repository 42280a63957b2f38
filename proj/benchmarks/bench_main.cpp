// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/estimation.hpp"
#include "mtcmimo/pilots.hpp"
#include "mtcmimo/powerctl.hpp"
#include "mtcmimo/rates.hpp"
#include "mtcmimo/scenario.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace mtcmimo;

namespace {

void BM_GramStats(benchmark::State& state)
{
    const PilotBook book = make_wbe_book(static_cast<int>(state.range(0)), 45);
    for (auto _ : state)
        benchmark::DoNotOptimize(gram_stats(book).spectral_radius);
}
BENCHMARK(BM_GramStats)->Arg(5)->Arg(10)->Arg(20);

void BM_McTrials(benchmark::State& state)
{
    SystemParams params;
    params.antennas = static_cast<int>(state.range(0));
    const Scenario sc = place_devices(params);
    SchemeConfig cfg;
    cfg.scheme = Scheme::SC3;
    const RateModel model(sc, cfg, make_wbe_book(10, sc.machines()), sci_pilot_powers(sc));
    const std::vector<double> p(static_cast<std::size_t>(sc.size()), 1.0);
    McOptions opt;
    opt.trials = 64;
    for (auto _ : state)
        benchmark::DoNotOptimize(mc_use_and_forget(model, p, opt));
    state.SetItemsProcessed(state.iterations() * opt.trials);
}
BENCHMARK(BM_McTrials)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_MaxminFeasible(benchmark::State& state)
{
    SystemParams params;
    params.antennas = 200;
    const Scenario sc = place_devices(params);
    SchemeConfig cfg;
    cfg.scheme = static_cast<Scheme>(state.range(0));
    const RateModel model(sc, cfg, make_wbe_book(10, sc.machines()), sci_pilot_powers(sc));
    std::vector<double> t(static_cast<std::size_t>(sc.size()), 0.2);
    for (int k = 0; k < sc.humans(); ++k)
        t[static_cast<std::size_t>(k)] = 3.0;
    for (auto _ : state)
        benchmark::DoNotOptimize(maxmin_feasible(model, t, 1.0).feasible);
}
BENCHMARK(BM_MaxminFeasible)
    ->Arg(static_cast<int>(Scheme::SC1))
    ->Arg(static_cast<int>(Scheme::SC2))
    ->Arg(static_cast<int>(Scheme::SC3))
    ->Unit(benchmark::kMicrosecond);

void BM_NmsePoint(benchmark::State& state)
{
    NmseConfig cfg;
    cfg.snr_db = {20};
    cfg.trials = 200;
    for (auto _ : state)
        benchmark::DoNotOptimize(nmse_curve(cfg));
}
BENCHMARK(BM_NmsePoint)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
