#pragma once

#include <stdexcept>
#include <string>

namespace heavytail {

// Argument outside the mathematical domain of an operation (alpha outside
// (0,1), n = 0, nonpositive order statistics, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// An exponent left the representable range while evaluating a transform.
class OverflowError : public std::overflow_error {
public:
    OverflowError(const std::string& what, double at)
        : std::overflow_error(what), x_(at) {}

    /// Argument at which the exponent exceeded range.
    double x() const noexcept { return x_; }

private:
    double x_;
};

// Operation not available for this family (e.g. parameter gradients of a
// tabulated g).
class CapabilityError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class InitializationError : public std::runtime_error {
public:
    InitializationError(const std::string& what, std::string parameter)
        : std::runtime_error(what), parameter_(std::move(parameter)) {}

    const std::string& parameter() const noexcept { return parameter_; }

private:
    std::string parameter_;
};

class DegenerateDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BinDegeneracyError : public std::runtime_error {
public:
    BinDegeneracyError(const std::string& what, std::size_t bin)
        : std::runtime_error(what), bin_(bin) {}

    std::size_t bin() const noexcept { return bin_; }

private:
    std::size_t bin_;
};

// A constructive routine found its precondition violated; witness() is the
// offending abscissa.
class ConstructionError : public std::runtime_error {
public:
    ConstructionError(const std::string& what, double witness)
        : std::runtime_error(what), witness_(witness) {}

    double witness() const noexcept { return witness_; }

private:
    double witness_;
};

// Malformed or unusable input data; row() is 1-based (0 when not tied to a row).
class DataError : public std::runtime_error {
public:
    DataError(const std::string& what, std::size_t row = 0)
        : std::runtime_error(row ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

} // namespace heavytail
