#pragma once

#include <stdexcept>
#include <string>

namespace cascade_lab {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent configuration (bad JSON, unknown key, empty atom list).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input is well-formed but violates an operation's precondition,
/// e.g. solving for a fixed point without initially infected mass.
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical procedure left its valid domain.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cascade_lab
