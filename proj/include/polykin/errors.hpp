#pragma once

#include <stdexcept>
#include <string>

namespace polykin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. I <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Caller misuse: unknown selector, empty callable, mismatched grids.
class UsageError : public Error {
public:
    using Error::Error;
};

/// The discretized model violates a structural expectation (e.g. kernel dimension).
class ModelError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed or produced an inconsistent result.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Requested resolution exceeds the configured resource limits.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration (range checks, stiffness guards).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input violates a documented precondition of an operation.
class PreconditionError : public Error {
public:
    using Error::Error;
};

} // namespace polykin
