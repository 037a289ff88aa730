#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ratemb {

// Every error raised by the library derives from Error so callers can catch
// the whole family at a stage boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

// An architecture or pipeline description that cannot be realized.
class SpecError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

// Math domain violations, e.g. cosine of a zero vector.
class DomainError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Singular or near-singular linear system.
class RankError : public Error {
public:
    using Error::Error;
};

// IRLS did not converge, or drifted to the boundary of the mean space.
// Carries the last coefficient vector for diagnostics.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> last)
        : Error(what), last_(std::move(last)) {}

    const std::vector<double>& last_coefficients() const { return last_; }

private:
    std::vector<double> last_;
};

}  // namespace ratemb
