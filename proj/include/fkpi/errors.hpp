#pragma once

#include <stdexcept>
#include <string>

namespace fkpi {

// Root of the library's error hierarchy. Every precondition failure maps to
// one of the concrete types below so callers can discriminate on catch.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct NotStochastic : Error {
    using Error::Error;
};

// Boltzmann-Gibbs denominator vanished: potential/measure mismatch, not a
// numerical event (floor 1e-300 is unreachable for bounded potentials).
struct DegenerateWeight : Error {
    using Error::Error;
};

struct HorizonExceeded : Error {
    using Error::Error;
};

struct IndexOrder : Error {
    using Error::Error;
};

struct SignViolation : Error {
    using Error::Error;
};

struct WrongPotentialSign : SignViolation {
    using SignViolation::SignViolation;
};

struct BadSize : Error {
    using Error::Error;
};

struct ModelMismatch : Error {
    using Error::Error;
};

struct UnboundedRate : Error {
    using Error::Error;
};

struct InsufficientPoints : Error {
    using Error::Error;
};

struct NonpositiveValue : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace fkpi
