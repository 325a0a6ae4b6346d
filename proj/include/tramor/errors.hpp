#ifndef TRAMOR_ERRORS_HPP
#define TRAMOR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tramor {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mismatched grids, component counts, or array shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Shift evaluation left the hull of the stored domain.
class DomainExceededError : public Error {
public:
    using Error::Error;
};

/// Requested rank exceeds the numerically attainable rank.
class RankDeficiencyError : public Error {
public:
    RankDeficiencyError(const std::string& msg, int attainable)
        : Error(msg), attainable_rank(attainable) {}
    int attainable_rank;
};

/// Singular reduced mass matrix without regularization enabled.
class DegenerateMassError : public Error {
public:
    DegenerateMassError(const std::string& msg, double smallest_sv)
        : Error(msg), smallest_singular_value(smallest_sv) {}
    double smallest_singular_value;
};

/// Newton iteration or adaptive stepping failed to advance.
class StepFailureError : public Error {
public:
    StepFailureError(const std::string& msg, double at_time)
        : Error(msg), time(at_time) {}
    double time;
};

/// Invalid experiment configuration; message carries the field path.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A configuration that the operation does not support.
class UnsupportedConfigurationError : public Error {
public:
    using Error::Error;
};

} // namespace tramor

#endif
