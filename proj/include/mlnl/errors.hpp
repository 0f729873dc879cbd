#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mlnl {

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Caller broke a documented precondition (e.g. x on a kink).
struct PreconditionError : DomainError {
    using DomainError::DomainError;
};

/// Float-mode resonance guard tripped; `index` names the offending series index or atom.
struct NearResonance : DomainError {
    int index;
    NearResonance(const std::string& what, int i) : DomainError(what), index(i) {}
};

/// Problem data violates model hypotheses (p < p_min, q < 0, envelope broken).
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Required input (derivative samples etc.) missing.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Least-squares fit cannot be formed.
struct DegenerateFit : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    double condition_estimate;
    NumericError(const std::string& what, double cond)
        : std::runtime_error(what), condition_estimate(cond) {}
};

struct QuadratureError : std::runtime_error {
    double partial_value;
    double error_estimate;
    QuadratureError(const std::string& what, double v, double e)
        : std::runtime_error(what), partial_value(v), error_estimate(e) {}
};

struct FixedPointError : std::runtime_error {
    std::vector<double> history;  ///< sup-norm increments per iteration
    FixedPointError(const std::string& what, std::vector<double> h)
        : std::runtime_error(what), history(std::move(h)) {}
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mlnl
