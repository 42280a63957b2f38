// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtcmimo {

/// Invalid parameters or inconsistent configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A requested target (error level, SINR, rate) cannot be met.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DeviceClass { Human, Machine };

enum class Estimator { LS, LMMSE };

enum class PilotKind { Orthogonal, Wbe, RandomAssignment };

/// Coherence-interval sharing scheme.
///  - SC1: humans and machines use disjoint CIs (fraction alpha to humans).
///  - SC2: one shared training window, then shared data.
///  - SC3: humans train first, machines train while humans already send data.
///  - OPA: SC2-style CIs with machines scheduled in orthogonal-pilot groups.
enum class Scheme { SC1, SC2, SC3, OPA };

/// Receive combiner used for humans; machines always use MRC.
enum class Receiver { MRC, ZF };

std::string_view to_string(DeviceClass c);
std::string_view to_string(Estimator e);
std::string_view to_string(PilotKind k);
std::string_view to_string(Scheme s);
std::string_view to_string(Receiver r);

Estimator parse_estimator(std::string_view s);
PilotKind parse_pilot_kind(std::string_view s);
Scheme parse_scheme(std::string_view s);
Receiver parse_receiver(std::string_view s);

} // namespace mtcmimo
