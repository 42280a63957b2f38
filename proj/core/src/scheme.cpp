// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/scheme.hpp"

#include <algorithm>
#include <string>

namespace mtcmimo {

void SchemeConfig::validate(int humans, int machines) const
{
    const int n = coherence_length;
    if (n < 1)
        throw ConfigError("coherence length must be positive");
    if (humans > 0 && human_pilot_length < humans)
        throw ConfigError("human pilot length must be >= K_h for orthogonal human pilots");
    if (human_pilot_length < 0)
        throw ConfigError("human pilot length must be non-negative");
    if (scheme == Scheme::OPA) {
        if (opa_group_size < 1)
            throw ConfigError("OPA group size must be positive");
        if (human_pilot_length + opa_group_size > n - 1)
            throw ConfigError("OPA group too large for the coherence interval");
        return;
    }
    if (machines > 0 && machine_pilot_length < 1)
        throw ConfigError("machine pilot length must be positive");
    switch (scheme) {
    case Scheme::SC1:
        if (human_pilot_length > n || machine_pilot_length > n)
            throw ConfigError("SC1 pilot lengths must not exceed N");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ConfigError("alpha must lie in [0, 1]");
        break;
    case Scheme::SC2:
    case Scheme::SC3:
        if (human_pilot_length + machine_pilot_length > n)
            throw ConfigError("N_p^h + N_p^m must not exceed N");
        break;
    case Scheme::OPA: break;
    }
}

int SchemeConfig::human_training_length() const
{
    switch (scheme) {
    case Scheme::SC2: return human_pilot_length + machine_pilot_length;
    case Scheme::OPA: return human_pilot_length + opa_group_size;
    default: return human_pilot_length;
    }
}

int SchemeConfig::machine_training_length() const
{
    switch (scheme) {
    case Scheme::SC2: return human_pilot_length + machine_pilot_length;
    case Scheme::OPA: return human_pilot_length + opa_group_size;
    default: return machine_pilot_length;
    }
}

int SchemeConfig::total_pilot_samples() const
{
    if (scheme == Scheme::OPA)
        return human_pilot_length + opa_group_size;
    return human_pilot_length + machine_pilot_length;
}

int SchemeConfig::opa_group_count(int machines) const
{
    if (opa_group_size < 1)
        throw ConfigError("OPA group size must be positive");
    return (machines + opa_group_size - 1) / opa_group_size;
}

std::vector<double> SchemeConfig::human_prelogs() const
{
    const double n = coherence_length;
    switch (scheme) {
    case Scheme::SC1: return {alpha * (n - human_pilot_length) / n};
    case Scheme::SC2:
    case Scheme::OPA: return {(n - total_pilot_samples()) / n};
    case Scheme::SC3:
        if (sc3_identical_machine_powers)
            return {(n - human_pilot_length) / n};
        return {machine_pilot_length / n, (n - human_pilot_length - machine_pilot_length) / n};
    }
    return {};
}

std::vector<double> SchemeConfig::machine_prelogs(int machines) const
{
    const double n = coherence_length;
    switch (scheme) {
    case Scheme::SC1: return {(1.0 - alpha) * (n - machine_pilot_length) / n};
    case Scheme::SC2:
    case Scheme::SC3: return {(n - total_pilot_samples()) / n};
    case Scheme::OPA: return {(n - total_pilot_samples()) / n / std::max(1, opa_group_count(machines))};
    }
    return {};
}

} // namespace mtcmimo
