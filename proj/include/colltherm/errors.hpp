#pragma once

#include <stdexcept>
#include <string>

namespace colltherm {

// Base of every error raised by the library. The CLI maps the three direct
// families onto exit codes: ConfigError -> 2, DomainError -> 3,
// InvariantViolation -> 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: argument outside the operation's domain or model regime.
class DomainError : public Error {
public:
    using Error::Error;
};

// Closed-form formula requested outside the parameter regime it holds in.
class RegimeError : public DomainError {
public:
    using DomainError::DomainError;
};

class DegenerateMapError : public DomainError {
public:
    using DomainError::DomainError;
};

class DegenerateDistributionError : public DomainError {
public:
    using DomainError::DomainError;
};

class UnsupportedOrderError : public DomainError {
public:
    using DomainError::DomainError;
};

// Van Trees bound requested for a prior that is not differentiable at the
// interval ends (the exact uniform prior).
class BoundInapplicableError : public DomainError {
public:
    using DomainError::DomainError;
};

// Asymptotic error diverges because F vanishes where the prior has weight.
class DivergentError : public DomainError {
public:
    using DomainError::DomainError;
};

// A record that has vanishing probability under the model being used.
class UnderflowError : public DomainError {
public:
    using DomainError::DomainError;
};

class InconsistentRecordError : public DomainError {
public:
    using DomainError::DomainError;
};

// Internal consistency failure (e.g. a map produced a non-physical state).
class InvariantViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : Error(key.empty() ? what : key + ": " + what), key_(key) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace colltherm
