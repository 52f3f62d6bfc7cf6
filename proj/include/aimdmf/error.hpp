#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace aimdmf {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or structurally invalid model / experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Rate evaluation produced a NaN, a negative value, or hit a degenerate coefficient.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Bad argument to a numerical kernel (e.g. a non-positive loss coefficient).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// The model is well formed but the requested engine cannot run it.
class UnsupportedModelError : public Error {
public:
    using Error::Error;
};

/// Root bracket without a sign change.
class BracketError : public Error {
public:
    using Error::Error;
};

/// Quadrature, series or numerical state failure.
class NumericError : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations. Carries the update-size history.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}

    const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

}  // namespace aimdmf
