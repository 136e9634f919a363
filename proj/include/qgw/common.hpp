#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qgw {

using idx = std::int64_t;

/// Bad input data or parameters (CLI exit code 2).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure, e.g. strict-mode non-convergence (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File parsing or filesystem failure (CLI exit code 4).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace qgw
