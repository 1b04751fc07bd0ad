#pragma once

#include <stdexcept>
#include <string>

namespace qbeat {

// Base of every error the library throws. Callers that only care about
// "something went wrong in qbeat" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Record content that parses but breaks an invariant (ordering, range).
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class UnsupportedInputError : public Error {
public:
    using Error::Error;
};

// Fit that did not converge within the iteration cap; keeps the best
// residual norm reached.
class FitError : public NumericalError {
public:
    FitError(const std::string& what, double best_residual)
        : NumericalError(what + " (best residual " + std::to_string(best_residual) + ")"), residual_(best_residual) {}
    double best_residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace qbeat
