#pragma once

#include <stdexcept>
#include <string>

namespace socpf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (feeder files, settings files, options).
class InputError : public Error {
public:
    using Error::Error;
};

/// JSON syntax error with a 1-based source position.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, int line, int column)
        : InputError(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// A precondition of an operation was violated by the caller.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// An iterative numerical procedure did not converge.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double worst) : Error(what), worst_(worst) {}
    double worst() const { return worst_; }

private:
    double worst_;
};

/// An optimization model has no feasible point.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

}  // namespace socpf
