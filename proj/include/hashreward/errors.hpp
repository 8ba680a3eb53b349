#pragma once

#include <stdexcept>
#include <string>

namespace hashreward {

// Shapes or wiring that do not fit together (layer chaining, cache/net mismatch).
class ConfigurationError : public std::logic_error {
public:
    explicit ConfigurationError(const std::string& what) : std::logic_error(what) {}
};

// Caller-supplied data violates an operation's precondition.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// NaN/Inf or a non-converging iteration.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A mathematical precondition of a bound does not hold.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Unreadable or incompatible files.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hashreward
