#pragma once

#include <stdexcept>
#include <string>

namespace robscat {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched sizes between operands.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Input outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Ill-conditioned or singular linear algebra.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// An iteration produced an invalid (non-finite or nonpositive) iterate.
// Carries the last valid iterate for diagnostics.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, std::vector<double> last_valid)
        : Error(msg), last_valid_iterate(std::move(last_valid)) {}
    std::vector<double> last_valid_iterate;
};

// A solver exhausted its budget without meeting its tolerance, in a context
// where the caller demanded convergence.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& msg, std::vector<double> last)
        : Error(msg), last_iterate(std::move(last)) {}
    std::vector<double> last_iterate;
};

// Top eigenvalue not simple.
class MultiplicityError : public Error {
public:
    explicit MultiplicityError(const std::string& msg) : Error(msg) {}
};

// No isolated eigenvalue found where one was required.
class SpikeAbsentError : public Error {
public:
    explicit SpikeAbsentError(const std::string& msg) : Error(msg) {}
};

// Contour quadrature failed its quality gate.
class ContourQualityError : public Error {
public:
    explicit ContourQualityError(const std::string& msg) : Error(msg) {}
};

// Bad configuration (CLI / config file). Maps to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Filesystem failure. Maps to exit code 4.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace robscat
