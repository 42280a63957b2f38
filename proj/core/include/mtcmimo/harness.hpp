// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mtcmimo/powerctl.hpp"
#include "mtcmimo/scenario.hpp"
#include "mtcmimo/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtcmimo {

std::string_view version();

/// Fixed: one placement from the master seed for the whole figure.
/// PerDrop: metrics averaged over `drops` independent placements.
enum class PlacementMode { Fixed, PerDrop };

std::string_view to_string(PlacementMode m);
PlacementMode parse_placement(std::string_view s);

struct ExperimentSpec {
    std::string figure = "fig4";  ///< fig1 ... fig7
    SystemParams params;           ///< ignored for fig1; seed is replaced by `seed`
    std::optional<std::string> scenario_file;
    std::uint64_t seed = 1;
    PlacementMode placement = PlacementMode::Fixed;
    int drops = 1;

    std::vector<double> snr_db;        ///< fig1
    std::vector<int> antennas;         ///< fig3, fig5 (M grid); first entry elsewhere
    std::vector<int> machine_counts;   ///< fig2
    std::vector<int> pilot_lengths;    ///< fig2 sweep; N_p^m search grid for fig3-7
    std::vector<double> r_h_grid;      ///< fig4-7; empty: `r_h_points` up to the largest R_h
    int r_h_points = 21;

    long long trials = 10000;  ///< fig1
    int coherence_length = 100;
    std::vector<Scheme> schemes;
    std::vector<PilotKind> books;
    std::vector<Receiver> receivers;
    bool sc3_exact_inversion = true;
    unsigned workers = 1;
    std::string output_dir = ".";
};

/// Caption defaults for a figure id; throws ConfigError for unknown ids.
ExperimentSpec default_spec(std::string_view figure);

std::vector<std::string> figure_ids();

struct ExperimentOutput {
    std::string csv_path;
    std::string meta_path;
    std::size_t rows = 0;
};

/// Runs the figure and writes <output_dir>/<figure>.csv and
/// <figure>.meta.json. Deterministic in (spec, seed) for any worker count.
/// Throws ConfigError for invalid specs and std::runtime_error when the
/// output cannot be written.
ExperimentOutput run_experiment(const ExperimentSpec& spec);

/// Placement used by a spec for drop `drop` (scenario file when given).
Scenario experiment_scenario(const ExperimentSpec& spec, int drop = 0);

/// Common R_h grid of `points` values from 0 to the largest max-min human
/// rate among the given region options.
std::vector<double> common_r_h_grid(const Scenario& scenario, std::span<const double> q,
                                    std::span<const RegionOptions> curves, int points);

} // namespace mtcmimo
