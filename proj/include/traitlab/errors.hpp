#pragma once

#include <stdexcept>
#include <string>

namespace traitlab {

// Error taxonomy mirrored by CLI exit codes:
//   ConfigError / IoError -> 4, AssumptionError -> 2, NumericsError -> 3.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct AssumptionError : std::runtime_error {
    explicit AssumptionError(const std::string& msg) : std::runtime_error(msg) {}
};

// CFL violations, step-size underflow, exponent overflow, population caps,
// leap bounds: anything where the numerics refuse to continue.
struct NumericsError : std::runtime_error {
    explicit NumericsError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace traitlab
