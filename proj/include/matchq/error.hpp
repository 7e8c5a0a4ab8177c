#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace matchq {

/// Invalid model or limit parameters (nonpositive rates, broken invariants).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A call argument outside the operation's domain (negative time, grid past horizon, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Solver configuration that cannot be honoured (e.g. explicit step unstable).
class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The truncated state space does not fit the configured capacity.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative solver ran out of iterations.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A statistic that has no defined value for the given input (e.g. every sample censored).
class UndefinedStatisticError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An internal invariant of a simulated trajectory failed. Indicates a bug.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Experiment config that fails the schema; carries every violation found.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(std::vector<std::string> violations)
        : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "invalid config:";
        for (const auto& s : v) out += "\n  - " + s;
        return out;
    }
};

}  // namespace matchq
