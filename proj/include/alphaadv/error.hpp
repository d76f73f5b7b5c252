#pragma once

#include <stdexcept>
#include <string>

namespace alphaadv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition (bad flag, bad shape, bad range).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : Error(what), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// A numerical procedure could not produce a trustworthy answer.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Information matrix too close to singular to invert.
class SingularMatrixError : public NumericalError {
public:
    SingularMatrixError(const std::string& what, double rcond)
        : NumericalError(what), rcond_(rcond) {}

    double reciprocal_condition() const noexcept { return rcond_; }

private:
    double rcond_;
};

/// MLE coefficients ran past the divergence cap: the classes are (quasi-)separable.
class SeparationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace alphaadv
