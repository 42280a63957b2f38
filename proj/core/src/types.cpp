// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/types.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace mtcmimo {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.erase(std::remove(out.begin(), out.end(), '-'), out.end());
    return out;
}

} // namespace

std::string_view to_string(DeviceClass c)
{
    return c == DeviceClass::Human ? "human" : "machine";
}

std::string_view to_string(Estimator e)
{
    return e == Estimator::LS ? "ls" : "lmmse";
}

std::string_view to_string(PilotKind k)
{
    switch (k) {
    case PilotKind::Orthogonal: return "orthogonal";
    case PilotKind::Wbe: return "wbe";
    case PilotKind::RandomAssignment: return "rpa";
    }
    return "?";
}

std::string_view to_string(Scheme s)
{
    switch (s) {
    case Scheme::SC1: return "sc1";
    case Scheme::SC2: return "sc2";
    case Scheme::SC3: return "sc3";
    case Scheme::OPA: return "opa";
    }
    return "?";
}

std::string_view to_string(Receiver r)
{
    return r == Receiver::MRC ? "mrc" : "zf";
}

Estimator parse_estimator(std::string_view s)
{
    const auto v = lower(s);
    if (v == "ls")
        return Estimator::LS;
    if (v == "lmmse" || v == "mmse")
        return Estimator::LMMSE;
    throw ConfigError("unknown estimator: " + std::string(s));
}

PilotKind parse_pilot_kind(std::string_view s)
{
    const auto v = lower(s);
    if (v == "orthogonal" || v == "orth")
        return PilotKind::Orthogonal;
    if (v == "wbe")
        return PilotKind::Wbe;
    if (v == "rpa" || v == "random")
        return PilotKind::RandomAssignment;
    throw ConfigError("unknown pilot book kind: " + std::string(s));
}

Scheme parse_scheme(std::string_view s)
{
    const auto v = lower(s);
    if (v == "sc1" || v == "1")
        return Scheme::SC1;
    if (v == "sc2" || v == "2")
        return Scheme::SC2;
    if (v == "sc3" || v == "3")
        return Scheme::SC3;
    if (v == "opa")
        return Scheme::OPA;
    throw ConfigError("unknown scheme: " + std::string(s));
}

Receiver parse_receiver(std::string_view s)
{
    const auto v = lower(s);
    if (v == "mrc")
        return Receiver::MRC;
    if (v == "zf")
        return Receiver::ZF;
    throw ConfigError("unknown receiver: " + std::string(s));
}

} // namespace mtcmimo
