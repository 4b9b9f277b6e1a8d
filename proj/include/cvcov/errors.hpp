#pragma once

#include <stdexcept>
#include <string>

namespace cvcov {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input data (dimensions, non-finite values, empty sets).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Invalid hyperparameters, schemes or configuration files.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numerical routine did not produce a usable result.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A feature with zero sample variance where a positive variance is required.
class DegenerateFeature : public InvalidInput {
public:
    DegenerateFeature(std::size_t column, const std::string& what)
        : InvalidInput(what), column_(column) {}

    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

/// Every candidate in a library failed.
class SelectionError : public Error {
public:
    using Error::Error;
};

}  // namespace cvcov
