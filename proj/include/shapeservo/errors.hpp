#pragma once

#include <stdexcept>
#include <string>

namespace shapeservo {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Two legs of a bending angle meet in (nearly) the same point.
struct CoincidentPoints : Error {
    using Error::Error;
};

// Twist angle undefined: the endpoint sits on the base-frame x-axis.
struct DegenerateTwist : Error {
    using Error::Error;
};

// Section marker indices out of range or inconsistent.
struct BadMarkers : Error {
    using Error::Error;
};

// Feature Jacobian requested within tolerance of a degenerate configuration.
struct NearSingularFeature : Error {
    using Error::Error;
};

// Actuator command or query outside the configured limits.
struct OutOfRange : Error {
    using Error::Error;
};

// Commanded actuator velocity above the plant limit (controller bug).
struct VelocityLimit : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// NaN/Inf encountered where finite values are required.
struct NonFinite : Error {
    using Error::Error;
};

// Degenerate range passed to a grid/bank constructor.
struct BadRange : Error {
    using Error::Error;
};

// Least-squares regressor Gram matrix effectively singular.
struct IllConditionedFit : Error {
    using Error::Error;
};

struct EmptyTrace : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Scenario JSON malformed, inconsistent, or carrying unknown keys.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace shapeservo
