#pragma once

#include <stdexcept>

namespace flex {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error { using Error::Error; };
struct UnstableModel : Error { using Error::Error; };
struct NonPsdCovariance : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct SolverFailure : Error { using Error::Error; };
struct InfeasibleBaseline : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct MissingHour : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace flex
