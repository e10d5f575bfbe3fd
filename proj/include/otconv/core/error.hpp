#pragma once

#include <stdexcept>
#include <string>

namespace otconv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on the inputs of an operation was violated
/// (wrong grid kind, non-skew matrix, size cap exceeded, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An iterative solver failed to reach its tolerance, or a time stepper
/// detected an instability.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Advection CFL number above the hard limit.
class CflError : public SolverError {
public:
    using SolverError::SolverError;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace otconv
