#pragma once

#include <stdexcept>
#include <string>

namespace lpvmpc {

// Scheduling-speed window. The LPV matrix entries divide by the longitudinal
// speed, so every consumer clamps or rejects speeds outside this range.
inline constexpr double kSpeedMin = 1.0;    // m/s
inline constexpr double kSpeedMax = 100.0;  // m/s

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateWaypoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyTrajectory : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProjectionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PlantDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lpvmpc
