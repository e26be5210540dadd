#pragma once

#include <stdexcept>
#include <string>

namespace tierrank {

// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Network / model-service failures (connection refused, timeout, 5xx).
// Retryable up to the configured budget.
struct TransportError : Error {
    using Error::Error;
};

// Malformed or version-incompatible artifact files and responses.
struct FormatError : Error {
    using Error::Error;
};

// Strict-mode mock received a request with no matching script rule.
struct ScriptError : Error {
    using Error::Error;
};

// Bad configuration file or CLI arguments.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace tierrank
