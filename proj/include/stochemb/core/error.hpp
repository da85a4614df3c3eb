#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stochemb {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed field expression. `position()` is a 0-based byte offset.
class ParseError : public Error {
public:
    ParseError(std::string message, std::size_t position)
        : Error(message + " at position " + std::to_string(position)),
          position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Expression evaluated outside its domain (log of nonpositive, division by zero, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Arguments violating an operation's preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Numerical failure during a computation (blow-up, norm drift, singular solve).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Finite-state blow-up in an SDE path.
class BlowUpError : public NumericalError {
public:
    BlowUpError(std::size_t path, std::size_t step)
        : NumericalError("non-finite state in path " + std::to_string(path) + " at step " +
                         std::to_string(step)),
          path_(path), step_(step) {}
    std::size_t path() const noexcept { return path_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t path_;
    std::size_t step_;
};

}  // namespace stochemb
