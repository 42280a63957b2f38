// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mtcmimo/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mtcmimo {

/// Static parameters of the single-cell deployment. Defaults are the
/// reference operating point (250 m cell, 5 humans, 45 machines).
struct SystemParams {
    int antennas = 100;          ///< M
    int coherence_length = 100;  ///< N, samples per coherence interval
    int humans = 5;              ///< K_h
    int machines = 45;           ///< K_m
    double cell_radius_m = 250.0;
    double min_distance_m = 20.0;
    double noise_power_w = 2e-13;
    double max_pilot_power_w = 1.0;
    double max_data_power_w = 1.0;
    std::uint64_t seed = 1;

    int devices() const { return humans + machines; }

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

struct Device {
    int id = 0;
    DeviceClass cls = DeviceClass::Human;
    double distance_m = 0.0;  ///< 0 for analysis devices without geometry
    double beta = 0.0;        ///< linear large-scale fading
};

/// Path loss in dB at `distance_m` meters: 130 + 37.6 log10(d_km).
double path_loss_db(double distance_m);

/// Linear large-scale fading coefficient at `distance_m`.
double beta_from_distance(double distance_m);

/// Immutable deployment: parameters plus devices ordered humans-first.
class Scenario {
public:
    /// Validates ordering (humans first), ids, counts and beta > 0.
    /// Devices with a positive distance must lie inside the annulus.
    Scenario(SystemParams params, std::vector<Device> devices);

    /// Analysis scenario with explicit betas and no geometry.
    static Scenario from_betas(SystemParams params, std::span<const double> human_betas,
                               std::span<const double> machine_betas);

    const SystemParams& params() const { return params_; }
    const std::vector<Device>& devices() const { return devices_; }
    const Device& device(int k) const { return devices_.at(static_cast<std::size_t>(k)); }

    int antennas() const { return params_.antennas; }
    int humans() const { return params_.humans; }
    int machines() const { return params_.machines; }
    int size() const { return params_.devices(); }
    bool is_human(int k) const { return k < params_.humans; }

    double noise() const { return params_.noise_power_w; }

    /// Path-loss coefficient at the cell edge.
    double beta_min() const { return beta_min_; }

    std::vector<double> betas() const;

    /// Same devices, different antenna count.
    Scenario with_antennas(int antennas) const;

    /// Scenario restricted to the listed device ids (humans must come first);
    /// ids are renumbered from zero.
    Scenario subset(std::span<const int> ids) const;

private:
    SystemParams params_;
    std::vector<Device> devices_;
    double beta_min_ = 0.0;
};

/// Draws K_h + K_m devices uniformly over the annulus area
/// [min_distance_m, cell_radius_m]; deterministic in params.seed.
Scenario place_devices(const SystemParams& params);

/// JSON round trip: {"params": {...}, "devices": [{id, class, distance_m, beta}]}.
void save_scenario(const Scenario& scenario, std::ostream& out);
Scenario load_scenario(std::istream& in);
void save_scenario(const Scenario& scenario, const std::string& path);
Scenario load_scenario(const std::string& path);

} // namespace mtcmimo
