// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/scenario.hpp"
#include "mtcmimo/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mtcmimo {

using nlohmann::json;

void SystemParams::validate() const
{
    if (antennas < 1)
        throw ConfigError("antennas must be >= 1");
    if (humans < 0 || machines < 0 || humans + machines < 1)
        throw ConfigError("need K_h >= 0, K_m >= 0 and at least one device");
    if (coherence_length < humans + 1)
        throw ConfigError("coherence length must be at least K_h + 1");
    if (!(min_distance_m > 0.0) || !(min_distance_m < cell_radius_m))
        throw ConfigError("need 0 < min_distance_m < cell_radius_m");
    if (!(noise_power_w > 0.0))
        throw ConfigError("noise power must be positive");
    if (!(max_pilot_power_w > 0.0) || !(max_data_power_w > 0.0))
        throw ConfigError("power caps must be positive");
}

double path_loss_db(double distance_m)
{
    if (!(distance_m > 0.0))
        throw std::domain_error("path loss requires a positive distance");
    return 130.0 + 37.6 * std::log10(distance_m / 1000.0);
}

double beta_from_distance(double distance_m)
{
    return std::pow(10.0, -path_loss_db(distance_m) / 10.0);
}

Scenario::Scenario(SystemParams params, std::vector<Device> devices)
    : params_(std::move(params)), devices_(std::move(devices))
{
    params_.validate();
    if (static_cast<int>(devices_.size()) != params_.devices())
        throw ConfigError("device table size does not match K_h + K_m");
    for (int k = 0; k < static_cast<int>(devices_.size()); ++k) {
        const auto& d = devices_[static_cast<std::size_t>(k)];
        if (d.id != k)
            throw ConfigError("device ids must be 0..K-1 in order");
        const auto expected = k < params_.humans ? DeviceClass::Human : DeviceClass::Machine;
        if (d.cls != expected)
            throw ConfigError("devices must list all humans before all machines");
        if (!(d.beta > 0.0) || !std::isfinite(d.beta))
            throw ConfigError("beta must be positive and finite");
        if (d.distance_m != 0.0
            && (d.distance_m < params_.min_distance_m || d.distance_m > params_.cell_radius_m))
            throw ConfigError("device distance outside [d_min, R]");
    }
    beta_min_ = beta_from_distance(params_.cell_radius_m);
}

Scenario Scenario::from_betas(SystemParams params, std::span<const double> human_betas,
                              std::span<const double> machine_betas)
{
    params.humans = static_cast<int>(human_betas.size());
    params.machines = static_cast<int>(machine_betas.size());
    std::vector<Device> devices;
    devices.reserve(human_betas.size() + machine_betas.size());
    int id = 0;
    for (double b : human_betas)
        devices.push_back({id++, DeviceClass::Human, 0.0, b});
    for (double b : machine_betas)
        devices.push_back({id++, DeviceClass::Machine, 0.0, b});
    return Scenario(params, std::move(devices));
}

std::vector<double> Scenario::betas() const
{
    std::vector<double> out;
    out.reserve(devices_.size());
    for (const auto& d : devices_)
        out.push_back(d.beta);
    return out;
}

Scenario Scenario::with_antennas(int antennas) const
{
    auto p = params_;
    p.antennas = antennas;
    return Scenario(p, devices_);
}

Scenario Scenario::subset(std::span<const int> ids) const
{
    auto p = params_;
    p.humans = 0;
    p.machines = 0;
    std::vector<Device> out;
    out.reserve(ids.size());
    for (int id : ids) {
        auto d = device(id);
        d.id = static_cast<int>(out.size());
        (d.cls == DeviceClass::Human ? p.humans : p.machines)++;
        out.push_back(d);
    }
    return Scenario(p, std::move(out));
}

Scenario place_devices(const SystemParams& params)
{
    params.validate();
    Engine engine(derive_seed(params.seed, 0x706c616365ULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double r2_lo = params.min_distance_m * params.min_distance_m;
    const double r2_hi = params.cell_radius_m * params.cell_radius_m;

    std::vector<Device> devices;
    devices.reserve(static_cast<std::size_t>(params.devices()));
    for (int k = 0; k < params.devices(); ++k) {
        // Radius from the inverse CDF of an area-uniform annulus; the angle is
        // drawn too so the stream matches a full 2-D placement.
        const double u = unit(engine);
        [[maybe_unused]] const double angle = 2.0 * std::numbers::pi * unit(engine);
        double d = std::sqrt(r2_lo + u * (r2_hi - r2_lo));
        d = std::clamp(d, params.min_distance_m, params.cell_radius_m);
        const auto cls = k < params.humans ? DeviceClass::Human : DeviceClass::Machine;
        devices.push_back({k, cls, d, beta_from_distance(d)});
    }
    return Scenario(params, std::move(devices));
}

namespace {

json params_to_json(const SystemParams& p)
{
    return json{{"antennas", p.antennas},
                {"coherence_length", p.coherence_length},
                {"humans", p.humans},
                {"machines", p.machines},
                {"cell_radius_m", p.cell_radius_m},
                {"min_distance_m", p.min_distance_m},
                {"noise_power_w", p.noise_power_w},
                {"max_pilot_power_w", p.max_pilot_power_w},
                {"max_data_power_w", p.max_data_power_w},
                {"seed", p.seed}};
}

SystemParams params_from_json(const json& j)
{
    SystemParams p;
    p.antennas = j.value("antennas", p.antennas);
    p.coherence_length = j.value("coherence_length", p.coherence_length);
    p.humans = j.value("humans", p.humans);
    p.machines = j.value("machines", p.machines);
    p.cell_radius_m = j.value("cell_radius_m", p.cell_radius_m);
    p.min_distance_m = j.value("min_distance_m", p.min_distance_m);
    p.noise_power_w = j.value("noise_power_w", p.noise_power_w);
    p.max_pilot_power_w = j.value("max_pilot_power_w", p.max_pilot_power_w);
    p.max_data_power_w = j.value("max_data_power_w", p.max_data_power_w);
    p.seed = j.value("seed", p.seed);
    return p;
}

} // namespace

void save_scenario(const Scenario& scenario, std::ostream& out)
{
    json devices = json::array();
    for (const auto& d : scenario.devices())
        devices.push_back({{"id", d.id},
                           {"class", std::string(to_string(d.cls))},
                           {"distance_m", d.distance_m},
                           {"beta", d.beta}});
    json doc{{"params", params_to_json(scenario.params())}, {"devices", devices}};
    out << doc.dump(2) << '\n';
}

Scenario load_scenario(std::istream& in)
{
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario file: ") + e.what());
    }
    auto params = params_from_json(doc.at("params"));
    if (!doc.contains("devices")) {
        // Parameters only: generate from the seed.
        return place_devices(params);
    }
    std::vector<Device> devices;
    int humans = 0;
    for (const auto& jd : doc.at("devices")) {
        Device d;
        d.id = jd.value("id", static_cast<int>(devices.size()));
        const auto cls = jd.value("class", std::string("machine"));
        d.cls = cls == "human" ? DeviceClass::Human : DeviceClass::Machine;
        humans += d.cls == DeviceClass::Human;
        d.distance_m = jd.value("distance_m", 0.0);
        if (jd.contains("beta"))
            d.beta = jd.at("beta").get<double>();
        else
            d.beta = beta_from_distance(d.distance_m);
        devices.push_back(d);
    }
    params.humans = humans;
    params.machines = static_cast<int>(devices.size()) - humans;
    return Scenario(params, std::move(devices));
}

void save_scenario(const Scenario& scenario, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write " + path);
    save_scenario(scenario, out);
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read " + path);
    return load_scenario(in);
}

} // namespace mtcmimo
