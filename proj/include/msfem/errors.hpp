#pragma once

#include <stdexcept>
#include <string>

namespace msfem {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DegenerateElement : public Error {
public:
    using Error::Error;
};

class OutOfDomain : public Error {
public:
    using Error::Error;
};

/// Iterative solver did not reach its tolerance. Carries the last relative residual.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, double relative_residual)
        : Error(what), relative_residual_(relative_residual) {}

    double relative_residual() const noexcept { return relative_residual_; }

private:
    double relative_residual_;
};

/// Factorization broke down (matrix not SPD, or singular).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Failure inside one coarse element's local problem.
class ElementFailure : public Error {
public:
    ElementFailure(int element, const std::string& what)
        : Error("element " + std::to_string(element) + ": " + what), element_(element) {}

    int element() const noexcept { return element_; }

private:
    int element_;
};

} // namespace msfem
