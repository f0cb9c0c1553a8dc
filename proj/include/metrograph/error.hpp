#pragma once

#include <stdexcept>
#include <string>

namespace metrograph {

/// Raised for malformed input: bad documents, violated preconditions,
/// mismatched models. Maps to exit code 2 in the CLI.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot deliver its postcondition
/// (singular system, no root found, degenerate projection). Exit code 1.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace metrograph
