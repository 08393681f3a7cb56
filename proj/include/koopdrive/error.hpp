#pragma once

#include <stdexcept>
#include <string>

namespace koopdrive {

// Three error classes; the CLI maps them to exit codes 2, 3 and 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File missing, unreadable or unwritable.
class IoError : public Error {
public:
    using Error::Error;
};

// Inputs violate a precondition (shape, range, schema, feasibility).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A numerical computation could not produce a trustworthy result.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace koopdrive
